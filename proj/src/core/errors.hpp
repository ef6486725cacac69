#pragma once

#include <stdexcept>
#include <string>

namespace qdpost {

// Error taxonomy. The C API maps these onto status codes and the CLI onto
// distinct exit codes, so keep the hierarchy flat and unambiguous.

/// Violated precondition or parameter outside its mathematical domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration file or field (unknown key, wrong type, invalid value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or parse failure; message carries path and line where known.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit could not produce a result (singular design, no convergence).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdpost
