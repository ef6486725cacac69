#pragma once

#include <array>
#include <cstdint>

namespace qdpost {

/// Derive an independent stream key from (key, salt). Same inputs give the
/// same key on every platform; distinct salts give statistically unrelated
/// streams.
std::uint64_t derive_key(std::uint64_t key, std::uint64_t salt);

/// Deterministic random stream (xoshiro256++ seeded via splitmix64) with
/// keyed substream derivation.
///
/// All simulation randomness flows through this class rather than
/// <random> distributions so that results are bit-identical across
/// standard libraries, runs, and thread counts. Per-pulse substreams
/// derived with substream(pulse_index) make block-parallel generation
/// produce exactly the serial output.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t key);

  /// Child stream fully determined by this stream's key and the salt.
  RandomStream substream(std::uint64_t salt) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();
  std::uint64_t operator()() { return next_u64(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  /// Uniform double in [0, 1), 53 significant bits.
  double uniform();

  /// Exponential variate with the given mean (inverse CDF).
  double exponential(double mean);

  /// Gaussian variate (Box-Muller, no caching so the draw count per call
  /// is fixed).
  double normal(double mean, double sigma);

  /// Poisson variate; exact for any mean (large means are split into
  /// sub-30 chunks to avoid exp underflow in the product method).
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace qdpost
