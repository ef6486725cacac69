#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/detection.hpp"
#include "core/source_model.hpp"

namespace qdpost {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct AnalysisConfig {
  double bin_width_ns = 0.25;
  double window_ns = 104.0;  // +-8 repetition periods at the default 13 ns
  HistogramMode mode = HistogramMode::AllPairs;
  // pair response of the two-detector measurement (473 ps FWHM combined)
  double sigma_irf_ns = 0.2008646057681165;
  int n_side_peaks = 0;  // 0 = derive from the window
  bool poisson_ml = false;
  bool fit_tau = false;
  double lifetime_start_ns = -1.0;  // < 0 = start at the peak bin
  // collection-and-detection efficiency used to convert count rate to mean
  // photon number; derived from channel and emitter when unset
  std::optional<double> detection_efficiency;

  void validate() const;
  bool operator==(const AnalysisConfig&) const = default;
};

struct CavityConfig {
  double q_post = 628.0;
  double q_planar = 1718.0;
  double q_post_err = 69.0;
  double q_planar_err = 13.0;
  double tau_on_err_ns = 1.2;
  double tau_off_err_ns = 1.4;

  void validate() const;
  bool operator==(const CavityConfig&) const = default;
};

struct OpticsConfig {
  double core_radius_um = 0.3;  // top radius of the post, where light exits
  double n_core = 3.5;
  double n_clad = 1.0;
  double wavelength_nm = 855.0;
  double medium_index = 1.0;
  std::optional<double> lens_half_angle_rad;  // unset = calibrate from target
  double collection_target = 0.22;
  int pad_factor = 4;

  void validate() const;
  bool operator==(const OpticsConfig&) const = default;
};

/// One reproducible experiment. All randomness derives from `seed`; the
/// excitation rng_seed is overwritten with it on load so a config file has
/// exactly one entropy source.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  EmitterParams emitter;  // measured lifetimes and visibility
  // repetition period and P_sat are not measured quantities; these are the
  // documented defaults (typical mode-locked pump, saturation at 3 uW)
  ExcitationConfig excitation{13.0, 3.0, 3.0, 1'000'000, 1};
  // amplitude calibrated so g2(0) at saturation is ~0.14, the observed
  // sevenfold suppression; the quadratic power law is a documented default
  BackgroundParams background{0.0495, 2.0, 4.4};
  // beta and eta_extract from the cavity figures; lens estimate 22%;
  // detector efficiency 3.02% as measured including polarizer losses
  // (hence unit polarizer fields)
  ChannelEfficiencies channel{0.8268, 0.36554, 0.22, 1.0, 1.0, 0.0302};
  // 473 ps FWHM combined pair response -> 142 ps sigma per detector
  DetectorSpec detector{0.142, 0.0, 0.0};
  AnalysisConfig analysis;
  CavityConfig cavity;
  OpticsConfig optics;
  std::vector<double> pipeline_powers_uw = {0.5, 1.0, 2.0, 3.0,
                                            5.0, 8.0, 12.0, 20.0};

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;

  /// Effective collection-and-detection efficiency of the apparatus (lens,
  /// polarizer ensemble for the line's polarized fraction, detector), used
  /// to normalize count rates. beta and eta_extract are device properties
  /// and are deliberately not included.
  double apparatus_efficiency() const;
};

/// Paper-calibrated defaults (the struct defaults above).
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// FNV-1a 64 hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace qdpost
