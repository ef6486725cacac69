#include "core/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace qdpost {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const char* section,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw ConfigError(std::string("config section '") + section +
                      "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError(std::string("unknown config key '") + key +
                        "' in section '" + section + "'");
  }
}

template <typename T>
void get_field(const json& obj, const char* section, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + section + "." + key +
                      "' has the wrong type");
  }
}

}  // namespace

void AnalysisConfig::validate() const {
  if (!(bin_width_ns > 0.0))
    throw ConfigError("analysis.bin_width_ns must be > 0");
  if (!(window_ns > 0.0)) throw ConfigError("analysis.window_ns must be > 0");
  if (!(sigma_irf_ns >= 0.0))
    throw ConfigError("analysis.sigma_irf_ns must be >= 0");
  if (n_side_peaks < 0)
    throw ConfigError("analysis.n_side_peaks must be >= 0");
  if (detection_efficiency &&
      !(*detection_efficiency > 0.0 && *detection_efficiency <= 1.0))
    throw ConfigError("analysis.detection_efficiency must be in (0, 1]");
}

void CavityConfig::validate() const {
  if (!(q_post > 0.0)) throw ConfigError("cavity.q_post must be > 0");
  if (!(q_planar > 0.0)) throw ConfigError("cavity.q_planar must be > 0");
  if (!(q_post_err >= 0.0) || !(q_planar_err >= 0.0) ||
      !(tau_on_err_ns >= 0.0) || !(tau_off_err_ns >= 0.0))
    throw ConfigError("cavity uncertainties must be >= 0");
}

void OpticsConfig::validate() const {
  if (!(core_radius_um > 0.0))
    throw ConfigError("optics.core_radius_um must be > 0");
  if (!(n_clad >= 1.0) || !(n_core > n_clad))
    throw ConfigError("optics requires n_core > n_clad >= 1");
  if (!(wavelength_nm > 0.0))
    throw ConfigError("optics.wavelength_nm must be > 0");
  if (!(medium_index >= 1.0))
    throw ConfigError("optics.medium_index must be >= 1");
  if (lens_half_angle_rad &&
      !(*lens_half_angle_rad > 0.0 && *lens_half_angle_rad < 1.5707963267948966))
    throw ConfigError("optics.lens_half_angle_rad must be in (0, pi/2)");
  if (!(collection_target > 0.0 && collection_target < 1.0))
    throw ConfigError("optics.collection_target must be in (0, 1)");
  if (pad_factor < 1) throw ConfigError("optics.pad_factor must be >= 1");
}

void ExperimentConfig::validate() const {
  try {
    emitter.validate();
    excitation.validate();
    background.validate();
    channel.validate();
    detector.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  analysis.validate();
  cavity.validate();
  optics.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  for (double p : pipeline_powers_uw)
    if (!(p >= 0.0)) throw ConfigError("pipeline.powers_uw must be >= 0");
}

double ExperimentConfig::apparatus_efficiency() const {
  if (analysis.detection_efficiency) return *analysis.detection_efficiency;
  const double rho = emitter.polarized_fraction;
  const double pol =
      rho * channel.polarizer_linear + (1.0 - rho) * channel.polarizer_unpol;
  return channel.lens * pol * channel.detector;
}

ExperimentConfig default_config() { return {}; }

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(root, "(top level)",
               {"seed", "output_dir", "emitter", "excitation",
                "background", "channel", "detector", "analysis", "cavity",
                "optics", "pipeline"});

  ExperimentConfig c;
  get_field(root, "", "seed", c.seed);
  get_field(root, "", "output_dir", c.output_dir);

  if (root.contains("emitter")) {
    const auto& o = root["emitter"];
    require_keys(o, "emitter",
                 {"tau_on_ns", "tau_off_ns", "gamma_c_ratio",
                  "polarized_fraction"});
    get_field(o, "emitter", "tau_on_ns", c.emitter.tau_on_ns);
    get_field(o, "emitter", "tau_off_ns", c.emitter.tau_off_ns);
    get_field(o, "emitter", "gamma_c_ratio", c.emitter.gamma_c_ratio);
    get_field(o, "emitter", "polarized_fraction",
              c.emitter.polarized_fraction);
  }
  if (root.contains("excitation")) {
    const auto& o = root["excitation"];
    require_keys(o, "excitation",
                 {"rep_period_ns", "pump_power_uw", "p_sat_uw", "n_pulses"});
    get_field(o, "excitation", "rep_period_ns", c.excitation.rep_period_ns);
    get_field(o, "excitation", "pump_power_uw", c.excitation.pump_power_uw);
    get_field(o, "excitation", "p_sat_uw", c.excitation.p_sat_uw);
    get_field(o, "excitation", "n_pulses", c.excitation.n_pulses);
  }
  if (root.contains("background")) {
    const auto& o = root["background"];
    require_keys(o, "background", {"amplitude", "power_exponent", "tau_bg_ns"});
    get_field(o, "background", "amplitude", c.background.amplitude);
    get_field(o, "background", "power_exponent", c.background.power_exponent);
    get_field(o, "background", "tau_bg_ns", c.background.tau_bg_ns);
  }
  if (root.contains("channel")) {
    const auto& o = root["channel"];
    require_keys(o, "channel",
                 {"beta", "eta_extract", "lens", "polarizer_linear",
                  "polarizer_unpol", "detector"});
    get_field(o, "channel", "beta", c.channel.beta);
    get_field(o, "channel", "eta_extract", c.channel.eta_extract);
    get_field(o, "channel", "lens", c.channel.lens);
    get_field(o, "channel", "polarizer_linear", c.channel.polarizer_linear);
    get_field(o, "channel", "polarizer_unpol", c.channel.polarizer_unpol);
    get_field(o, "channel", "detector", c.channel.detector);
  }
  if (root.contains("detector")) {
    const auto& o = root["detector"];
    require_keys(o, "detector", {"jitter_sigma_ns", "dead_time_ns",
                                 "dark_rate_hz"});
    get_field(o, "detector", "jitter_sigma_ns", c.detector.jitter_sigma_ns);
    get_field(o, "detector", "dead_time_ns", c.detector.dead_time_ns);
    get_field(o, "detector", "dark_rate_hz", c.detector.dark_rate_hz);
  }
  if (root.contains("analysis")) {
    const auto& o = root["analysis"];
    require_keys(o, "analysis",
                 {"bin_width_ns", "window_ns", "mode", "sigma_irf_ns",
                  "n_side_peaks", "poisson_ml", "fit_tau", "lifetime_start_ns",
                  "detection_efficiency"});
    get_field(o, "analysis", "bin_width_ns", c.analysis.bin_width_ns);
    get_field(o, "analysis", "window_ns", c.analysis.window_ns);
    if (o.contains("mode")) {
      std::string mode;
      get_field(o, "analysis", "mode", mode);
      if (mode == "all_pairs")
        c.analysis.mode = HistogramMode::AllPairs;
      else if (mode == "start_stop")
        c.analysis.mode = HistogramMode::StartStop;
      else
        throw ConfigError(
            "analysis.mode must be 'all_pairs' or 'start_stop'");
    }
    get_field(o, "analysis", "sigma_irf_ns", c.analysis.sigma_irf_ns);
    get_field(o, "analysis", "n_side_peaks", c.analysis.n_side_peaks);
    get_field(o, "analysis", "poisson_ml", c.analysis.poisson_ml);
    get_field(o, "analysis", "fit_tau", c.analysis.fit_tau);
    get_field(o, "analysis", "lifetime_start_ns",
              c.analysis.lifetime_start_ns);
    if (o.contains("detection_efficiency")) {
      double v = 0.0;
      get_field(o, "analysis", "detection_efficiency", v);
      c.analysis.detection_efficiency = v;
    }
  }
  if (root.contains("cavity")) {
    const auto& o = root["cavity"];
    require_keys(o, "cavity",
                 {"q_post", "q_planar", "q_post_err", "q_planar_err",
                  "tau_on_err_ns", "tau_off_err_ns"});
    get_field(o, "cavity", "q_post", c.cavity.q_post);
    get_field(o, "cavity", "q_planar", c.cavity.q_planar);
    get_field(o, "cavity", "q_post_err", c.cavity.q_post_err);
    get_field(o, "cavity", "q_planar_err", c.cavity.q_planar_err);
    get_field(o, "cavity", "tau_on_err_ns", c.cavity.tau_on_err_ns);
    get_field(o, "cavity", "tau_off_err_ns", c.cavity.tau_off_err_ns);
  }
  if (root.contains("optics")) {
    const auto& o = root["optics"];
    require_keys(o, "optics",
                 {"core_radius_um", "n_core", "n_clad", "wavelength_nm",
                  "medium_index", "lens_half_angle_rad", "collection_target",
                  "pad_factor"});
    get_field(o, "optics", "core_radius_um", c.optics.core_radius_um);
    get_field(o, "optics", "n_core", c.optics.n_core);
    get_field(o, "optics", "n_clad", c.optics.n_clad);
    get_field(o, "optics", "wavelength_nm", c.optics.wavelength_nm);
    get_field(o, "optics", "medium_index", c.optics.medium_index);
    if (o.contains("lens_half_angle_rad")) {
      double v = 0.0;
      get_field(o, "optics", "lens_half_angle_rad", v);
      c.optics.lens_half_angle_rad = v;
    }
    get_field(o, "optics", "collection_target", c.optics.collection_target);
    get_field(o, "optics", "pad_factor", c.optics.pad_factor);
  }
  if (root.contains("pipeline")) {
    const auto& o = root["pipeline"];
    require_keys(o, "pipeline", {"powers_uw"});
    get_field(o, "pipeline", "powers_uw", c.pipeline_powers_uw);
  }

  c.excitation.rng_seed = c.seed;
  c.validate();
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  json root;
  root["seed"] = c.seed;
  root["output_dir"] = c.output_dir;
  root["emitter"] = {{"tau_on_ns", c.emitter.tau_on_ns},
                     {"tau_off_ns", c.emitter.tau_off_ns},
                     {"gamma_c_ratio", c.emitter.gamma_c_ratio},
                     {"polarized_fraction", c.emitter.polarized_fraction}};
  root["excitation"] = {{"rep_period_ns", c.excitation.rep_period_ns},
                        {"pump_power_uw", c.excitation.pump_power_uw},
                        {"p_sat_uw", c.excitation.p_sat_uw},
                        {"n_pulses", c.excitation.n_pulses}};
  root["background"] = {{"amplitude", c.background.amplitude},
                        {"power_exponent", c.background.power_exponent},
                        {"tau_bg_ns", c.background.tau_bg_ns}};
  root["channel"] = {{"beta", c.channel.beta},
                     {"eta_extract", c.channel.eta_extract},
                     {"lens", c.channel.lens},
                     {"polarizer_linear", c.channel.polarizer_linear},
                     {"polarizer_unpol", c.channel.polarizer_unpol},
                     {"detector", c.channel.detector}};
  root["detector"] = {{"jitter_sigma_ns", c.detector.jitter_sigma_ns},
                      {"dead_time_ns", c.detector.dead_time_ns},
                      {"dark_rate_hz", c.detector.dark_rate_hz}};
  json analysis = {{"bin_width_ns", c.analysis.bin_width_ns},
                   {"window_ns", c.analysis.window_ns},
                   {"mode", c.analysis.mode == HistogramMode::AllPairs
                                ? "all_pairs"
                                : "start_stop"},
                   {"sigma_irf_ns", c.analysis.sigma_irf_ns},
                   {"n_side_peaks", c.analysis.n_side_peaks},
                   {"poisson_ml", c.analysis.poisson_ml},
                   {"fit_tau", c.analysis.fit_tau},
                   {"lifetime_start_ns", c.analysis.lifetime_start_ns}};
  if (c.analysis.detection_efficiency)
    analysis["detection_efficiency"] = *c.analysis.detection_efficiency;
  root["analysis"] = std::move(analysis);
  root["cavity"] = {{"q_post", c.cavity.q_post},
                    {"q_planar", c.cavity.q_planar},
                    {"q_post_err", c.cavity.q_post_err},
                    {"q_planar_err", c.cavity.q_planar_err},
                    {"tau_on_err_ns", c.cavity.tau_on_err_ns},
                    {"tau_off_err_ns", c.cavity.tau_off_err_ns}};
  json optics = {{"core_radius_um", c.optics.core_radius_um},
                 {"n_core", c.optics.n_core},
                 {"n_clad", c.optics.n_clad},
                 {"wavelength_nm", c.optics.wavelength_nm},
                 {"medium_index", c.optics.medium_index},
                 {"collection_target", c.optics.collection_target},
                 {"pad_factor", c.optics.pad_factor}};
  if (c.optics.lens_half_angle_rad)
    optics["lens_half_angle_rad"] = *c.optics.lens_half_angle_rad;
  root["optics"] = std::move(optics);
  root["pipeline"] = {{"powers_uw", c.pipeline_powers_uw}};
  return root.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << serialize_config(config);
  if (!out) throw IoError("write failed: " + path);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = serialize_config(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016" PRIx64, h);
  return out;
}

}  // namespace qdpost
