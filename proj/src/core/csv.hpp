#pragma once

#include <string>
#include <vector>

#include "core/beam_optics.hpp"
#include "core/detection.hpp"
#include "core/fits.hpp"
#include "core/source_model.hpp"

namespace qdpost {

// File formats. All times are ns, powers uW, wavelengths nm. Text files are
// plain CSV with one header line; per-run metadata lives in a JSON sidecar
// named <base>.meta.json so the data files stay byte-deterministic.

void write_stream_csv(const EmissionStream& stream, const std::string& path);

void write_records_csv(const DetectionRecords& records, const std::string& path);
void write_records_meta(const DetectionRecords& records, std::uint64_t seed,
                        const std::string& config_hash, const std::string& path);
DetectionRecords read_records_csv(const std::string& path);
/// Fills duration/total_pulses from the sidecar when it exists; returns
/// whether it was found.
bool read_records_meta(const std::string& csv_path, DetectionRecords& records);

void write_histogram_csv(const CorrelationHistogram& hist,
                         const std::string& path);
void write_histogram_meta(const CorrelationHistogram& hist, std::uint64_t seed,
                          const std::string& config_hash,
                          const std::string& path);
CorrelationHistogram read_histogram_csv(const std::string& path);

std::vector<SpectrumSample> read_spectrum_csv(const std::string& path);

/// Near-field grid, CSV or binary (auto-detected on read). CSV: first data
/// line "nx,ny,dx_um,dy_um", then nx*ny lines "re,im" in row-major order.
/// Binary layout (little-endian): magic "QDPNF01\n", u32 nx, u32 ny,
/// f64 dx_um, f64 dy_um, then nx*ny (f64 re, f64 im) row-major.
FieldGrid read_field_grid(const std::string& path);
void write_field_grid_binary(const FieldGrid& grid, const std::string& path);
void write_field_grid_csv(const FieldGrid& grid, const std::string& path);

void write_far_field_csv(const FarFieldPattern& pattern,
                         const std::string& path);

/// Sidecar path for a data file: "<base>.meta.json" (".csv" stripped).
std::string sidecar_path(const std::string& data_path);

/// FNV-1a 64-bit checksum of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::string& path);
std::uint64_t file_size(const std::string& path);

}  // namespace qdpost
