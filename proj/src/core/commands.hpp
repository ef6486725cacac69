#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/correlation.hpp"
#include "core/fits.hpp"

namespace qdpost {

// High-level run entry points shared by the C API and the CLI. Each writes
// its data files plus a run manifest into out_dir and returns the in-memory
// results. Data files are byte-deterministic for a fixed config and seed;
// wall-clock timestamps appear only in the manifest.

struct SimulateResult {
  std::string stream_csv;
  std::string records_csv;
  std::uint64_t n_events = 0;
  std::uint64_t n_qd_events = 0;
  std::uint64_t n_background_events = 0;
  std::uint64_t n_records = 0;
  double count_rate_per_s = 0.0;
};

SimulateResult run_simulate(const ExperimentConfig& config,
                            const std::string& out_dir,
                            unsigned n_threads = 1);

struct AnalyzeResult {
  PeakFit fit;
  bool have_rate = false;  // histogram inputs without metadata lack a rate
  double count_rate_per_s = 0.0;
  double n_mean = 0.0;
  double n_mean_err = 0.0;
  double eta = 0.0;
  double eta_err = 0.0;
  std::string report_json;
  std::string curve_csv;
};

/// Input may be a detection-records CSV (a histogram is built with the
/// analysis settings) or a histogram CSV (used as-is).
AnalyzeResult run_analyze(const ExperimentConfig& config,
                          const std::string& input_path,
                          const std::string& out_dir);

struct PowerPoint {
  double pump_power_uw = 0.0;
  double n_mean = 0.0;
  double n_mean_err = 0.0;
  double g2_zero = 0.0;
  double g2_err = 0.0;
  double eta = 0.0;
  double eta_err = 0.0;
  bool eta_valid = false;  // false when g2 > 1
};

struct PipelineResult {
  std::vector<PowerPoint> points;
  bool saturation_done = false;
  std::string saturation_notice;
  SaturationFit saturation;
  CavityMetrics cavity;
  std::string table_csv;
  std::string report_json;
};

/// Simulate + analyze one run per pump power, fit the saturation curve when
/// three or more powers are given, and derive the cavity figures of merit
/// from the configured lifetimes and quality factors. powers may be empty to
/// use the config's pipeline list.
PipelineResult run_pipeline(const ExperimentConfig& config,
                            std::vector<double> powers_uw,
                            const std::string& out_dir,
                            unsigned n_threads = 1);

struct OpticsResult {
  double waist_um = 0.0;
  double v_number = 0.0;
  double divergence_rad = 0.0;
  bool paraxial_warning = false;
  std::optional<double> collection_fraction;  // set when a lens is configured
  double implied_lens_half_angle_rad = 0.0;   // for the collection target
  bool have_far_field = false;
  double far_field_e2_rad = 0.0;
  double parseval_residual = 0.0;
  std::string report_json;
  std::string far_field_csv;
};

OpticsResult run_optics(const ExperimentConfig& config,
                        const std::string& near_field_path,  // may be empty
                        const std::string& out_dir);

/// Human-readable rendering of a report JSON written by the commands above.
std::string render_report(const std::string& report_json_path);

}  // namespace qdpost
