#include "core/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "core/beam_optics.hpp"
#include "core/csv.hpp"
#include "core/errors.hpp"

namespace qdpost {

namespace {

using nlohmann::json;

constexpr std::uint64_t kSaltDetect = 0x02;
constexpr std::uint64_t kSaltPipeline = 0x04;

std::string utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["toolkit_version"] = kToolkitVersion;
  j["created_utc"] = utc_now();
  j["inputs"] = inputs;
  json outs = json::array();
  for (const auto& path : outputs) {
    outs.push_back({{"path", std::filesystem::path(path).filename().string()},
                    {"size", file_size(path)},
                    {"fnv1a64", file_checksum(path)}});
  }
  j["outputs"] = std::move(outs);
  std::ofstream out(join_path(out_dir, "manifest.json"));
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << j.dump(2) << '\n';
}

void write_report(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

json fit_to_json(const PeakFit& fit) {
  json j;
  j["area_central"] = fit.area_central;
  j["area_side"] = fit.area_side;
  j["g2_zero"] = fit.g2_zero;
  j["g2_err"] = fit.g2_err;
  j["area_central_err"] = fit.err_central;
  j["area_side_err"] = fit.err_side;
  j["cov_central_side"] = fit.cov_cs;
  j["chi2_dof"] = fit.chi2_dof;
  j["clamped"] = fit.clamped;
  if (fit.tau_fitted_ns > 0.0) j["tau_fitted_ns"] = fit.tau_fitted_ns;
  return j;
}

json cavity_to_json(const CavityMetrics& m) {
  json j;
  j["q_post"] = m.q_post;
  j["q_planar"] = m.q_planar;
  j["purcell"] = m.purcell;
  j["purcell_err"] = m.purcell_err;
  j["beta"] = m.beta;
  j["beta_err"] = m.beta_err;
  j["eta_extract"] = m.eta_extract;
  j["eta_extract_err"] = m.eta_extract_err;
  j["eta_expected"] = m.eta_expected;
  j["eta_expected_err"] = m.eta_expected_err;
  return j;
}

PeakTemplateParams template_params(const ExperimentConfig& config) {
  return {config.emitter.tau_on_ns, config.analysis.sigma_irf_ns,
          config.excitation.rep_period_ns};
}

struct EfficiencyEstimate {
  double count_rate = 0.0;
  double n_mean = 0.0;
  double n_mean_err = 0.0;
  double eta = 0.0;
  double eta_err = 0.0;
  bool eta_valid = false;
};

EfficiencyEstimate estimate_efficiency(const ExperimentConfig& config,
                                       std::uint64_t n_records,
                                       double duration_ns, const PeakFit& fit) {
  EfficiencyEstimate e;
  e.count_rate = static_cast<double>(n_records) / duration_ns * 1e9;
  const double rep_rate = 1e9 / config.excitation.rep_period_ns;
  const double det_eff = config.apparatus_efficiency();
  e.n_mean = mean_photon_number(e.count_rate, rep_rate, det_eff);
  e.n_mean_err =
      n_records > 0 ? e.n_mean / std::sqrt(static_cast<double>(n_records))
                    : 0.0;
  if (fit.g2_zero <= 1.0) {
    e.eta = single_photon_efficiency(e.n_mean, fit.g2_zero);
    const double root = std::sqrt(1.0 - fit.g2_zero);
    const double d_n = root * e.n_mean_err;
    const double d_g =
        root > 0.0 ? e.n_mean / (2.0 * root) * fit.g2_err : 0.0;
    e.eta_err = std::hypot(d_n, d_g);
    e.eta_valid = true;
  }
  return e;
}

CavityMetrics config_cavity_metrics(const ExperimentConfig& c) {
  return cavity_metrics(c.emitter.tau_off_ns, c.emitter.tau_on_ns,
                        c.emitter.gamma_c_ratio, c.cavity.q_post,
                        c.cavity.q_planar, c.cavity.tau_off_err_ns,
                        c.cavity.tau_on_err_ns, c.cavity.q_post_err,
                        c.cavity.q_planar_err);
}

}  // namespace

SimulateResult run_simulate(const ExperimentConfig& config,
                            const std::string& out_dir,
                            unsigned n_threads) {
  config.validate();
  ensure_dir(out_dir);

  // the config seed is the single entropy source even for configs built in
  // code rather than parsed from disk
  ExcitationConfig exc = config.excitation;
  exc.rng_seed = config.seed;
  const EmissionStream stream =
      generate_stream(config.emitter, exc, config.background,
                      std::max(1u, n_threads));
  const RandomStream detect_rng =
      RandomStream(config.seed).substream(kSaltDetect);
  const DetectionRecords records =
      detect(stream, config.channel, config.detector, detect_rng);

  SimulateResult res;
  res.stream_csv = join_path(out_dir, "stream.csv");
  res.records_csv = join_path(out_dir, "records.csv");
  res.n_events = stream.events.size();
  for (const auto& e : stream.events) {
    if (e.origin == Origin::QDLine)
      ++res.n_qd_events;
    else
      ++res.n_background_events;
  }
  res.n_records = records.total();
  res.count_rate_per_s = count_rate_per_s(records, records.duration_ns);

  write_stream_csv(stream, res.stream_csv);
  write_records_csv(records, res.records_csv);
  const std::string hash = config_hash(config);
  write_records_meta(records, config.seed, hash,
                     sidecar_path(res.records_csv));
  save_config(config, join_path(out_dir, "config.json"));

  json summary;
  summary["command"] = "simulate";
  summary["toolkit_version"] = kToolkitVersion;
  summary["config_hash"] = hash;
  summary["seed"] = config.seed;
  summary["n_pulses"] = config.excitation.n_pulses;
  summary["n_events"] = res.n_events;
  summary["n_qd_events"] = res.n_qd_events;
  summary["n_background_events"] = res.n_background_events;
  summary["n_records"] = res.n_records;
  summary["count_rate_per_s"] = res.count_rate_per_s;
  write_report(summary, join_path(out_dir, "summary.json"));

  write_manifest(out_dir, "simulate", config, {},
                 {res.stream_csv, res.records_csv,
                  sidecar_path(res.records_csv),
                  join_path(out_dir, "config.json"),
                  join_path(out_dir, "summary.json")});
  return res;
}

AnalyzeResult run_analyze(const ExperimentConfig& config,
                          const std::string& input_path,
                          const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);

  // records or histogram input, decided by the header line
  std::ifstream probe(input_path);
  if (!probe) throw IoError("cannot open: " + input_path);
  std::string header;
  std::getline(probe, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  probe.close();

  CorrelationHistogram hist;
  bool have_rate = false;
  if (header == "detector,time_ns") {
    DetectionRecords records = read_records_csv(input_path);
    have_rate = read_records_meta(input_path, records);
    hist = build_histogram(records, config.analysis.bin_width_ns,
                           config.analysis.window_ns, config.analysis.mode);
  } else if (header == "bin_center_ns,counts") {
    hist = read_histogram_csv(input_path);
    have_rate = hist.duration_ns > 0.0;
  } else {
    throw IoError(input_path +
                  ":1: unrecognized header; expected 'detector,time_ns' or "
                  "'bin_center_ns,counts'");
  }

  const PeakTemplateParams params = template_params(config);
  PeakFitOptions options;
  options.n_side_peaks = config.analysis.n_side_peaks;
  options.poisson_ml = config.analysis.poisson_ml;
  options.fit_tau = config.analysis.fit_tau;
  const PeakFit fit = fit_peak_areas(hist, params, options);

  AnalyzeResult res;
  res.fit = fit;
  res.have_rate = have_rate;

  json report;
  report["command"] = "analyze";
  report["toolkit_version"] = kToolkitVersion;
  report["config_hash"] = config_hash(config);
  report["seed"] = config.seed;
  report["input"] = std::filesystem::path(input_path).filename().string();
  report["histogram"] = {{"bin_width_ns", hist.bin_width_ns},
                         {"window_ns", hist.window_ns},
                         {"mode", hist.mode == HistogramMode::AllPairs
                                      ? "all_pairs"
                                      : "start_stop"},
                         {"n_bins", hist.n_bins()},
                         {"total_pulses", hist.total_pulses}};
  report["fit"] = fit_to_json(fit);

  json notices = json::array();
  if (have_rate) {
    const std::uint64_t n_records = hist.n_d1 + hist.n_d2;
    const EfficiencyEstimate e =
        estimate_efficiency(config, n_records, hist.duration_ns, fit);
    res.count_rate_per_s = e.count_rate;
    res.n_mean = e.n_mean;
    res.n_mean_err = e.n_mean_err;
    res.eta = e.eta;
    res.eta_err = e.eta_err;
    json eff;
    eff["count_rate_per_s"] = e.count_rate;
    eff["detection_efficiency"] = config.apparatus_efficiency();
    eff["n_mean"] = e.n_mean;
    eff["n_mean_err"] = e.n_mean_err;
    eff["multiphoton_bound"] =
        multiphoton_bound(e.n_mean, fit.g2_zero);
    if (e.eta_valid) {
      eff["eta"] = e.eta;
      eff["eta_err"] = e.eta_err;
    } else {
      notices.push_back(
          "g2_zero > 1: the single-photon efficiency model does not apply");
    }
    report["efficiency"] = std::move(eff);
  } else {
    notices.push_back(
        "no acquisition metadata found; count-rate normalization skipped");
  }
  report["notices"] = std::move(notices);

  res.report_json = join_path(out_dir, "report.json");
  write_report(report, res.report_json);

  // plot-ready data + model curve
  res.curve_csv = join_path(out_dir, "fit_curve.csv");
  {
    std::ofstream out(res.curve_csv);
    if (!out) throw IoError("cannot open for writing: " + res.curve_csv);
    out << "bin_center_ns,counts,model\n";
    const int n_side = options.n_side_peaks > 0
                           ? options.n_side_peaks
                           : side_peaks_for_window(hist.window_ns, params);
    PeakTemplateParams curve_params = params;
    if (fit.tau_fitted_ns > 0.0) curve_params.tau_decay_ns = fit.tau_fitted_ns;
    char buf[128];
    for (std::size_t i = 0; i < hist.n_bins(); ++i) {
      const double c = hist.bin_center(i);
      const double model = correlation_model(c, fit.area_central,
                                             fit.area_side, curve_params,
                                             n_side) *
                           hist.bin_width_ns;
      std::snprintf(buf, sizeof buf, "%.6f,%llu,%.6f", c,
                    static_cast<unsigned long long>(hist.counts[i]), model);
      out << buf << '\n';
    }
  }

  write_manifest(out_dir, "analyze", config, {input_path},
                 {res.report_json, res.curve_csv});
  return res;
}

PipelineResult run_pipeline(const ExperimentConfig& config,
                            std::vector<double> powers_uw,
                            const std::string& out_dir,
                            unsigned n_threads) {
  config.validate();
  ensure_dir(out_dir);
  if (powers_uw.empty()) powers_uw = config.pipeline_powers_uw;
  if (powers_uw.empty())
    throw ConfigError("pipeline: no pump powers configured");

  const std::size_t n_powers = powers_uw.size();
  std::vector<PowerPoint> points(n_powers);
  std::vector<std::exception_ptr> errors(n_powers);
  const std::uint64_t pipeline_key = derive_key(config.seed, kSaltPipeline);

  auto run_power = [&](std::size_t idx) {
    const double power = powers_uw[idx];
    ExperimentConfig sub = config;
    sub.excitation.pump_power_uw = power;
    sub.seed = derive_key(pipeline_key, idx);
    sub.excitation.rng_seed = sub.seed;

    const char* stage = "simulate";
    try {
      // parallelism lives at the power level here; each run is serial
      const EmissionStream stream = generate_stream(
          sub.emitter, sub.excitation, sub.background, 1);
      stage = "detect";
      const RandomStream rng = RandomStream(sub.seed).substream(kSaltDetect);
      const DetectionRecords records =
          detect(stream, sub.channel, sub.detector, rng);
      stage = "histogram";
      const CorrelationHistogram hist =
          build_histogram(records, sub.analysis.bin_width_ns,
                          sub.analysis.window_ns, sub.analysis.mode);
      stage = "fit";
      PeakFitOptions options;
      options.n_side_peaks = sub.analysis.n_side_peaks;
      options.poisson_ml = sub.analysis.poisson_ml;
      const PeakFit fit = fit_peak_areas(hist, template_params(sub), options);
      stage = "efficiency";
      const EfficiencyEstimate e = estimate_efficiency(
          sub, records.total(), records.duration_ns, fit);
      PowerPoint& pt = points[idx];
      pt.pump_power_uw = power;
      pt.n_mean = e.n_mean;
      pt.n_mean_err = e.n_mean_err;
      pt.g2_zero = fit.g2_zero;
      pt.g2_err = fit.g2_err;
      pt.eta = e.eta;
      pt.eta_err = e.eta_err;
      pt.eta_valid = e.eta_valid;
    } catch (const std::exception& e) {
      char prefix[96];
      std::snprintf(prefix, sizeof prefix, "pipeline power=%g stage=%s: ",
                    power, stage);
      try {
        throw;
      } catch (const DomainError&) {
        errors[idx] =
            std::make_exception_ptr(DomainError(prefix + std::string(e.what())));
      } catch (const FitError&) {
        errors[idx] =
            std::make_exception_ptr(FitError(prefix + std::string(e.what())));
      } catch (const IoError&) {
        errors[idx] =
            std::make_exception_ptr(IoError(prefix + std::string(e.what())));
      } catch (...) {
        errors[idx] = std::make_exception_ptr(
            std::runtime_error(prefix + std::string(e.what())));
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(
      n_threads, static_cast<unsigned>(n_powers)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_powers; ++i) run_power(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n_powers; i += workers) run_power(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  PipelineResult res;
  res.points = std::move(points);

  if (n_powers >= 3) {
    std::vector<double> p, eta;
    for (const auto& pt : res.points) {
      if (!pt.eta_valid) continue;
      p.push_back(pt.pump_power_uw);
      eta.push_back(pt.eta);
    }
    if (p.size() >= 3) {
      res.saturation = fit_saturation(p, eta);
      res.saturation_done = true;
    } else {
      res.saturation_notice =
          "saturation fit skipped: fewer than 3 usable efficiency points";
    }
  } else {
    res.saturation_notice =
        "saturation fit skipped: fewer than 3 pump powers supplied";
  }

  res.cavity = config_cavity_metrics(config);

  res.table_csv = join_path(out_dir, "pipeline.csv");
  {
    std::ofstream out(res.table_csv);
    if (!out) throw IoError("cannot open for writing: " + res.table_csv);
    out << "pump_power_uw,n_mean,n_mean_err,g2_zero,g2_err,eta,eta_err\n";
    char buf[192];
    for (const auto& pt : res.points) {
      std::snprintf(buf, sizeof buf, "%.6g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g",
                    pt.pump_power_uw, pt.n_mean, pt.n_mean_err, pt.g2_zero,
                    pt.g2_err, pt.eta_valid ? pt.eta : 0.0,
                    pt.eta_valid ? pt.eta_err : 0.0);
      out << buf << '\n';
    }
  }

  json report;
  report["command"] = "pipeline";
  report["toolkit_version"] = kToolkitVersion;
  report["config_hash"] = config_hash(config);
  report["seed"] = config.seed;
  report["powers_uw"] = powers_uw;
  json pts = json::array();
  for (const auto& pt : res.points) {
    json j;
    j["pump_power_uw"] = pt.pump_power_uw;
    j["n_mean"] = pt.n_mean;
    j["n_mean_err"] = pt.n_mean_err;
    j["g2_zero"] = pt.g2_zero;
    j["g2_err"] = pt.g2_err;
    if (pt.eta_valid) {
      j["eta"] = pt.eta;
      j["eta_err"] = pt.eta_err;
    }
    pts.push_back(std::move(j));
  }
  report["points"] = std::move(pts);
  if (res.saturation_done) {
    report["saturation"] = {{"eta_max", res.saturation.eta_max},
                            {"eta_max_err", res.saturation.eta_max_err},
                            {"p_sat_uw", res.saturation.p_sat},
                            {"p_sat_err_uw", res.saturation.p_sat_err},
                            {"chi2_dof", res.saturation.chi2_dof},
                            {"p_sat_identifiable",
                             res.saturation.p_sat_identifiable}};
  } else {
    report["saturation_notice"] = res.saturation_notice;
  }
  report["cavity"] = cavity_to_json(res.cavity);

  res.report_json = join_path(out_dir, "report.json");
  write_report(report, res.report_json);

  write_manifest(out_dir, "pipeline", config, {},
                 {res.table_csv, res.report_json});
  return res;
}

OpticsResult run_optics(const ExperimentConfig& config,
                        const std::string& near_field_path,
                        const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  const OpticsConfig& oc = config.optics;

  OpticsResult res;
  const double wavelength_um = oc.wavelength_nm * 1e-3;
  const ModeWaistResult waist = mode_waist_estimate(
      oc.core_radius_um, oc.n_core, oc.n_clad, wavelength_um);
  res.waist_um = waist.waist_um;
  res.v_number = waist.v_number;

  const GaussianBeam beam{waist.waist_um, wavelength_um, oc.medium_index};
  const DivergenceResult div = beam_divergence(beam);
  res.divergence_rad = div.half_angle_rad;
  res.paraxial_warning = div.paraxial_warning;

  if (oc.lens_half_angle_rad) {
    const CollectionResult col =
        lens_collection_fraction(div.half_angle_rad, *oc.lens_half_angle_rad);
    res.collection_fraction = col.fraction;
    res.paraxial_warning = res.paraxial_warning || col.paraxial_warning;
  }
  res.implied_lens_half_angle_rad =
      lens_half_angle_for_fraction(div.half_angle_rad, oc.collection_target);

  json report;
  report["command"] = "optics";
  report["toolkit_version"] = kToolkitVersion;
  report["config_hash"] = config_hash(config);
  report["seed"] = config.seed;
  report["mode_waist"] = {{"waist_um", res.waist_um},
                          {"v_number", res.v_number},
                          {"below_single_mode_validity",
                           waist.below_single_mode_validity}};
  report["divergence"] = {{"half_angle_rad", res.divergence_rad},
                          {"paraxial_warning", res.paraxial_warning}};
  if (res.collection_fraction) {
    report["collection"] = {
        {"lens_half_angle_rad", *oc.lens_half_angle_rad},
        {"fraction", *res.collection_fraction}};
  }
  report["calibration"] = {
      {"collection_target", oc.collection_target},
      {"implied_lens_half_angle_rad", res.implied_lens_half_angle_rad}};

  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  if (!near_field_path.empty()) {
    const char* stage = "read near field";
    try {
      const FieldGrid grid = read_field_grid(near_field_path);
      stage = "far field transform";
      const FarFieldPattern ff =
          far_field_transform(grid, wavelength_um, oc.pad_factor);
      res.have_far_field = true;
      res.far_field_e2_rad = far_field_e2_half_angle(ff);
      res.parseval_residual =
          std::abs(ff.spectrum_power - ff.near_field_power) /
          ff.near_field_power;
      res.far_field_csv = join_path(out_dir, "far_field.csv");
      write_far_field_csv(ff, res.far_field_csv);
      report["far_field"] = {
          {"e2_half_angle_sin", res.far_field_e2_rad},
          {"near_field_power", ff.near_field_power},
          {"propagating_power", ff.propagating_power},
          {"parseval_residual", res.parseval_residual}};
      inputs.push_back(near_field_path);
      outputs.push_back(res.far_field_csv);
    } catch (const DomainError& e) {
      throw DomainError(std::string("optics stage=") + stage + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError(std::string("optics stage=") + stage + ": " + e.what());
    }
  }

  res.report_json = join_path(out_dir, "report.json");
  write_report(report, res.report_json);
  outputs.push_back(res.report_json);
  write_manifest(out_dir, "optics", config, inputs, outputs);
  return res;
}

std::string render_report(const std::string& report_json_path) {
  std::ifstream in(report_json_path);
  if (!in) throw IoError("cannot open: " + report_json_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(report_json_path + ": " + e.what());
  }

  std::ostringstream out;
  out.setf(std::ios::fixed);
  const std::string command = j.value("command", "?");
  out << "== " << command << " report (toolkit "
      << j.value("toolkit_version", "?") << ") ==\n";
  out << "config " << j.value("config_hash", "?") << "  seed "
      << j.value("seed", std::uint64_t{0}) << "\n";

  auto val = [](const json& o, const char* k) { return o.value(k, 0.0); };

  if (j.contains("fit")) {
    const auto& f = j["fit"];
    out.precision(4);
    out << "g2(0)        " << val(f, "g2_zero") << " +/- " << val(f, "g2_err")
        << "\n";
    out.precision(1);
    out << "areas        central " << val(f, "area_central") << " +/- "
        << val(f, "area_central_err") << ", side " << val(f, "area_side")
        << " +/- " << val(f, "area_side_err") << "\n";
    out.precision(3);
    out << "chi2/dof     " << val(f, "chi2_dof") << "\n";
  }
  if (j.contains("efficiency")) {
    const auto& e = j["efficiency"];
    out.precision(4);
    out << "count rate   " << val(e, "count_rate_per_s") << " /s\n";
    out << "<n>          " << val(e, "n_mean") << " +/- "
        << val(e, "n_mean_err") << "\n";
    if (e.contains("eta"))
      out << "eta          " << val(e, "eta") << " +/- " << val(e, "eta_err")
          << "\n";
    out << "P(n>=2) <=   " << val(e, "multiphoton_bound") << "\n";
  }
  if (j.contains("points")) {
    out << "power_uW  n_mean   g2(0)    eta\n";
    out.precision(4);
    for (const auto& p : j["points"]) {
      out << "  " << val(p, "pump_power_uw") << "    " << val(p, "n_mean")
          << "   " << val(p, "g2_zero") << "   "
          << (p.contains("eta") ? val(p, "eta") : 0.0) << "\n";
    }
  }
  if (j.contains("saturation")) {
    const auto& s = j["saturation"];
    out.precision(4);
    out << "saturation   eta_max " << val(s, "eta_max") << " +/- "
        << val(s, "eta_max_err") << ", P_sat " << val(s, "p_sat_uw")
        << " +/- " << val(s, "p_sat_err_uw") << " uW\n";
  }
  if (j.contains("saturation_notice"))
    out << "saturation   " << j["saturation_notice"].get<std::string>()
        << "\n";
  if (j.contains("cavity")) {
    const auto& c = j["cavity"];
    out.precision(4);
    out << "purcell      " << val(c, "purcell") << " +/- "
        << val(c, "purcell_err") << "\n";
    out << "beta         " << val(c, "beta") << " +/- " << val(c, "beta_err")
        << "\n";
    out << "eta_extract  " << val(c, "eta_extract") << " +/- "
        << val(c, "eta_extract_err") << "\n";
    out << "eta_expected " << val(c, "eta_expected") << " +/- "
        << val(c, "eta_expected_err") << "\n";
  }
  if (j.contains("mode_waist")) {
    const auto& m = j["mode_waist"];
    out.precision(5);
    out << "waist        " << val(m, "waist_um") << " um (V = "
        << val(m, "v_number") << ")\n";
  }
  if (j.contains("divergence")) {
    out.precision(5);
    out << "divergence   " << val(j["divergence"], "half_angle_rad")
        << " rad\n";
  }
  if (j.contains("collection"))
    out << "collection   " << val(j["collection"], "fraction") << " at lens "
        << val(j["collection"], "lens_half_angle_rad") << " rad\n";
  if (j.contains("calibration"))
    out << "calibration  target " << val(j["calibration"], "collection_target")
        << " -> lens half-angle "
        << val(j["calibration"], "implied_lens_half_angle_rad") << " rad\n";
  if (j.contains("far_field"))
    out << "far field    1/e^2 half-angle sin "
        << val(j["far_field"], "e2_half_angle_sin") << "\n";
  if (j.contains("notices"))
    for (const auto& n : j["notices"])
      out << "note: " << n.get<std::string>() << "\n";
  if (j.contains("n_records")) {
    out << "events " << j.value("n_events", std::uint64_t{0}) << " (qd "
        << j.value("n_qd_events", std::uint64_t{0}) << ", background "
        << j.value("n_background_events", std::uint64_t{0}) << "), records "
        << j.value("n_records", std::uint64_t{0}) << "\n";
  }
  return out.str();
}

}  // namespace qdpost
