#include "qdpost/qdpost.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "core/commands.hpp"
#include "core/config.hpp"
#include "core/correlation.hpp"
#include "core/csv.hpp"
#include "core/errors.hpp"
#include "core/fits.hpp"
#include "core/beam_optics.hpp"

/* Opaque handle definitions; each wraps one core value. */
struct qdp_config { qdpost::ExperimentConfig v; };
struct qdp_stream { qdpost::EmissionStream v; };
struct qdp_records { qdpost::DetectionRecords v; };
struct qdp_histogram { qdpost::CorrelationHistogram v; };

namespace {

thread_local std::string tl_error;

void set_error(const char* msg) { tl_error = msg ? msg : ""; }

qdp_status fail_null(const char* what) {
  tl_error = std::string("null pointer: ") + what;
  return QDP_ERR_NULL;
}

/* run `fn`, translating exceptions into status codes + last-error text */
template <typename Fn>
qdp_status guard(Fn&& fn) {
  try {
    fn();
    tl_error.clear();
    return QDP_OK;
  } catch (const qdpost::DomainError& e) {
    set_error(e.what());
    return QDP_ERR_DOMAIN;
  } catch (const qdpost::ConfigError& e) {
    set_error(e.what());
    return QDP_ERR_CONFIG;
  } catch (const qdpost::IoError& e) {
    set_error(e.what());
    return QDP_ERR_IO;
  } catch (const qdpost::FitError& e) {
    set_error(e.what());
    return QDP_ERR_FIT;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return QDP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return QDP_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return QDP_ERR_INTERNAL;
  }
}

qdpost::Polarization to_polarization(int32_t pol) {
  if (pol != 0 && pol != 1)
    throw qdpost::DomainError("polarization must be 0 (linear) or 1 (unpolarized)");
  return pol == 0 ? qdpost::Polarization::Linear
                  : qdpost::Polarization::Unpolarized;
}

qdpost::HistogramMode to_mode(int32_t mode) {
  if (mode != 0 && mode != 1)
    throw qdpost::DomainError("mode must be 0 (all pairs) or 1 (start-stop)");
  return mode == 0 ? qdpost::HistogramMode::AllPairs
                   : qdpost::HistogramMode::StartStop;
}

constexpr std::uint64_t kSaltDetect = 0x02;  // matches the command layer

}  // namespace

extern "C" {

const char* qdp_version(void) { return qdpost::kToolkitVersion; }

const char* qdp_last_error(void) { return tl_error.c_str(); }

void qdp_config_free(qdp_config* cfg) { delete cfg; }
void qdp_stream_free(qdp_stream* stream) { delete stream; }
void qdp_records_free(qdp_records* records) { delete records; }
void qdp_histogram_free(qdp_histogram* hist) { delete hist; }

qdp_status qdp_config_default(qdp_config** out) {
  if (!out) return fail_null("out");
  return guard([&] { *out = new qdp_config{qdpost::default_config()}; });
}

qdp_status qdp_config_load(const char* path, qdp_config** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return guard([&] { *out = new qdp_config{qdpost::load_config(path)}; });
}

qdp_status qdp_config_parse(const char* json_text, qdp_config** out) {
  if (!json_text) return fail_null("json_text");
  if (!out) return fail_null("out");
  return guard([&] { *out = new qdp_config{qdpost::parse_config(json_text)}; });
}

qdp_status qdp_config_save(const qdp_config* cfg, const char* path) {
  if (!cfg) return fail_null("cfg");
  if (!path) return fail_null("path");
  return guard([&] { qdpost::save_config(cfg->v, path); });
}

qdp_status qdp_config_set_seed(qdp_config* cfg, uint64_t seed) {
  if (!cfg) return fail_null("cfg");
  cfg->v.seed = seed;
  cfg->v.excitation.rng_seed = seed;
  return QDP_OK;
}

qdp_status qdp_config_set_n_pulses(qdp_config* cfg, uint64_t n_pulses) {
  if (!cfg) return fail_null("cfg");
  return guard([&] {
    if (n_pulses < 1) throw qdpost::ConfigError("n_pulses must be >= 1");
    cfg->v.excitation.n_pulses = n_pulses;
  });
}

qdp_status qdp_config_set_pump_power(qdp_config* cfg, double power_uw) {
  if (!cfg) return fail_null("cfg");
  return guard([&] {
    if (!(power_uw >= 0.0))
      throw qdpost::ConfigError("pump power must be >= 0");
    cfg->v.excitation.pump_power_uw = power_uw;
  });
}

qdp_status qdp_config_get_seed(const qdp_config* cfg, uint64_t* out) {
  if (!cfg) return fail_null("cfg");
  if (!out) return fail_null("out");
  *out = cfg->v.seed;
  return QDP_OK;
}

qdp_status qdp_config_hash(const qdp_config* cfg, char* buf, size_t buf_len) {
  if (!cfg) return fail_null("cfg");
  if (!buf) return fail_null("buf");
  return guard([&] {
    const std::string h = qdpost::config_hash(cfg->v);
    if (buf_len < h.size() + 1)
      throw qdpost::DomainError("config hash buffer too small (needs 17 bytes)");
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

qdp_status qdp_excitation_probability(double pump_power_uw, double p_sat_uw,
                                      double* out) {
  if (!out) return fail_null("out");
  return guard(
      [&] { *out = qdpost::excitation_probability(pump_power_uw, p_sat_uw); });
}

qdp_status qdp_background_mean(double pump_power_uw, double amplitude,
                               double power_exponent, double p_sat_uw,
                               double* out) {
  if (!out) return fail_null("out");
  return guard([&] {
    qdpost::BackgroundParams bg;
    bg.amplitude = amplitude;
    bg.power_exponent = power_exponent;
    *out = qdpost::background_mean(pump_power_uw, bg, p_sat_uw);
  });
}

qdp_status qdp_simulate_stream(const qdp_config* cfg, qdp_stream** out) {
  if (!cfg) return fail_null("cfg");
  if (!out) return fail_null("out");
  return guard([&] {
    qdpost::ExcitationConfig exc = cfg->v.excitation;
    exc.rng_seed = cfg->v.seed;
    *out = new qdp_stream{qdpost::generate_stream(
        cfg->v.emitter, exc, cfg->v.background)};
  });
}

qdp_status qdp_stream_size(const qdp_stream* stream, uint64_t* out) {
  if (!stream) return fail_null("stream");
  if (!out) return fail_null("out");
  *out = stream->v.events.size();
  return QDP_OK;
}

qdp_status qdp_stream_event(const qdp_stream* stream, uint64_t index,
                            uint64_t* pulse_index, double* time_ns,
                            int32_t* origin, int32_t* polarization) {
  if (!stream) return fail_null("stream");
  return guard([&] {
    if (index >= stream->v.events.size())
      throw qdpost::DomainError("event index out of range");
    const auto& e = stream->v.events[index];
    if (pulse_index) *pulse_index = e.pulse_index;
    if (time_ns) *time_ns = stream->v.abs_time_ns(e);
    if (origin) *origin = e.origin == qdpost::Origin::QDLine ? 0 : 1;
    if (polarization)
      *polarization = e.polarization == qdpost::Polarization::Linear ? 0 : 1;
  });
}

qdp_status qdp_stream_write_csv(const qdp_stream* stream, const char* path) {
  if (!stream) return fail_null("stream");
  if (!path) return fail_null("path");
  return guard([&] { qdpost::write_stream_csv(stream->v, path); });
}

qdp_status qdp_polarizer_transmission(double polarized_fraction,
                                      double* linear, double* unpol,
                                      double* ensemble) {
  return guard([&] {
    const auto t = qdpost::polarizer_transmission(polarized_fraction);
    if (linear) *linear = t.linear;
    if (unpol) *unpol = t.unpol;
    if (ensemble) *ensemble = t.ensemble;
  });
}

qdp_status qdp_channel_transmission(const qdp_config* cfg,
                                    int32_t polarization, double* out) {
  if (!cfg) return fail_null("cfg");
  if (!out) return fail_null("out");
  return guard([&] {
    *out = qdpost::channel_transmission(cfg->v.channel,
                                        to_polarization(polarization));
  });
}

qdp_status qdp_detect(const qdp_config* cfg, const qdp_stream* stream,
                      qdp_records** out) {
  if (!cfg) return fail_null("cfg");
  if (!stream) return fail_null("stream");
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::RandomStream rng =
        qdpost::RandomStream(cfg->v.seed).substream(kSaltDetect);
    *out = new qdp_records{
        qdpost::detect(stream->v, cfg->v.channel, cfg->v.detector, rng)};
  });
}

qdp_status qdp_records_counts(const qdp_records* records, uint64_t* n_d1,
                              uint64_t* n_d2) {
  if (!records) return fail_null("records");
  if (n_d1) *n_d1 = records->v.d1_ns.size();
  if (n_d2) *n_d2 = records->v.d2_ns.size();
  return QDP_OK;
}

qdp_status qdp_records_time(const qdp_records* records, int32_t detector,
                            uint64_t index, double* time_ns) {
  if (!records) return fail_null("records");
  if (!time_ns) return fail_null("time_ns");
  return guard([&] {
    if (detector != 0 && detector != 1)
      throw qdpost::DomainError("detector must be 0 (D1) or 1 (D2)");
    const auto& v = detector == 0 ? records->v.d1_ns : records->v.d2_ns;
    if (index >= v.size())
      throw qdpost::DomainError("record index out of range");
    *time_ns = v[index];
  });
}

qdp_status qdp_records_write_csv(const qdp_records* records,
                                 const char* path) {
  if (!records) return fail_null("records");
  if (!path) return fail_null("path");
  return guard([&] { qdpost::write_records_csv(records->v, path); });
}

qdp_status qdp_records_read_csv(const char* path, qdp_records** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return guard([&] {
    auto rec = qdpost::read_records_csv(path);
    qdpost::read_records_meta(path, rec);
    *out = new qdp_records{std::move(rec)};
  });
}

qdp_status qdp_count_rate(const qdp_records* records, double duration_ns,
                          double* rate_per_s) {
  if (!records) return fail_null("records");
  if (!rate_per_s) return fail_null("rate_per_s");
  return guard(
      [&] { *rate_per_s = qdpost::count_rate_per_s(records->v, duration_ns); });
}

qdp_status qdp_build_histogram(const qdp_records* records, double bin_width_ns,
                               double window_ns, int32_t mode,
                               qdp_histogram** out) {
  if (!records) return fail_null("records");
  if (!out) return fail_null("out");
  return guard([&] {
    *out = new qdp_histogram{qdpost::build_histogram(
        records->v, bin_width_ns, window_ns, to_mode(mode))};
  });
}

qdp_status qdp_histogram_n_bins(const qdp_histogram* hist, uint64_t* out) {
  if (!hist) return fail_null("hist");
  if (!out) return fail_null("out");
  *out = hist->v.n_bins();
  return QDP_OK;
}

qdp_status qdp_histogram_bin(const qdp_histogram* hist, uint64_t index,
                             double* center_ns, uint64_t* counts) {
  if (!hist) return fail_null("hist");
  return guard([&] {
    if (index >= hist->v.n_bins())
      throw qdpost::DomainError("bin index out of range");
    if (center_ns) *center_ns = hist->v.bin_center(index);
    if (counts) *counts = hist->v.counts[index];
  });
}

qdp_status qdp_histogram_write_csv(const qdp_histogram* hist,
                                   const char* path) {
  if (!hist) return fail_null("hist");
  if (!path) return fail_null("path");
  return guard([&] { qdpost::write_histogram_csv(hist->v, path); });
}

qdp_status qdp_histogram_read_csv(const char* path, qdp_histogram** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return guard(
      [&] { *out = new qdp_histogram{qdpost::read_histogram_csv(path)}; });
}

qdp_status qdp_peak_template(double t_ns, double tau_decay_ns,
                             double sigma_irf_ns, double* out) {
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::PeakTemplateParams p{tau_decay_ns, sigma_irf_ns, 1.0};
    *out = qdpost::peak_template(t_ns, p);
  });
}

qdp_status qdp_correlation_model(double t_ns, double area_central,
                                 double area_side, double tau_decay_ns,
                                 double sigma_irf_ns, double rep_period_ns,
                                 int32_t n_side_peaks, double* out) {
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::PeakTemplateParams p{tau_decay_ns, sigma_irf_ns,
                                       rep_period_ns};
    *out = qdpost::correlation_model(t_ns, area_central, area_side, p,
                                     n_side_peaks);
  });
}

qdp_status qdp_fit_peak_areas(const qdp_histogram* hist, double tau_decay_ns,
                              double sigma_irf_ns, double rep_period_ns,
                              qdp_peak_fit* out) {
  if (!hist) return fail_null("hist");
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::PeakTemplateParams p{tau_decay_ns, sigma_irf_ns,
                                       rep_period_ns};
    const qdpost::PeakFit fit = qdpost::fit_peak_areas(hist->v, p);
    out->area_central = fit.area_central;
    out->area_side = fit.area_side;
    out->g2_zero = fit.g2_zero;
    out->g2_err = fit.g2_err;
    out->area_central_err = fit.err_central;
    out->area_side_err = fit.err_side;
    out->cov_central_side = fit.cov_cs;
    out->chi2_dof = fit.chi2_dof;
    out->clamped = fit.clamped ? 1 : 0;
  });
}

qdp_status qdp_multiphoton_bound(double n_mean, double g2_zero, double* out) {
  if (!out) return fail_null("out");
  return guard([&] { *out = qdpost::multiphoton_bound(n_mean, g2_zero); });
}

qdp_status qdp_mean_photon_number(double count_rate_per_s,
                                  double rep_rate_per_s, double detection_eff,
                                  double* out) {
  if (!out) return fail_null("out");
  return guard([&] {
    *out = qdpost::mean_photon_number(count_rate_per_s, rep_rate_per_s,
                                      detection_eff);
  });
}

qdp_status qdp_single_photon_efficiency(double n_mean, double g2_zero,
                                        double* out) {
  if (!out) return fail_null("out");
  return guard(
      [&] { *out = qdpost::single_photon_efficiency(n_mean, g2_zero); });
}

qdp_status qdp_fit_saturation(const double* power_uw, const double* eta,
                              size_t n, qdp_saturation_fit* out) {
  if (!power_uw) return fail_null("power_uw");
  if (!eta) return fail_null("eta");
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::SaturationFit fit =
        qdpost::fit_saturation({power_uw, n}, {eta, n});
    out->eta_max = fit.eta_max;
    out->p_sat_uw = fit.p_sat;
    out->eta_max_err = fit.eta_max_err;
    out->p_sat_err_uw = fit.p_sat_err;
    out->chi2_dof = fit.chi2_dof;
    out->p_sat_identifiable = fit.p_sat_identifiable ? 1 : 0;
  });
}

qdp_status qdp_fit_lifetime(const double* bin_centers_ns, const double* counts,
                            size_t n, double start_ns, qdp_lifetime_fit* out) {
  if (!bin_centers_ns) return fail_null("bin_centers_ns");
  if (!counts) return fail_null("counts");
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::LifetimeFit fit =
        qdpost::fit_lifetime({bin_centers_ns, n}, {counts, n}, start_ns);
    out->tau_ns = fit.tau_ns;
    out->tau_err_ns = fit.tau_err_ns;
  });
}

qdp_status qdp_fit_lorentzian(const double* wavelength_nm,
                              const double* intensity, size_t n,
                              qdp_lorentzian_fit* out) {
  if (!wavelength_nm) return fail_null("wavelength_nm");
  if (!intensity) return fail_null("intensity");
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::LorentzianFit fit =
        qdpost::fit_lorentzian({wavelength_nm, n}, {intensity, n});
    out->amplitude = fit.amplitude;
    out->center_nm = fit.center_nm;
    out->fwhm_nm = fit.fwhm_nm;
    out->offset = fit.offset;
    out->center_err_nm = fit.center_err_nm;
    out->fwhm_err_nm = fit.fwhm_err_nm;
    out->q = fit.q;
    out->q_err = fit.q_err;
    out->chi2_dof = fit.chi2_dof;
  });
}

qdp_status qdp_purcell_factor(double tau_off_ns, double tau_on_ns,
                              double* out) {
  if (!out) return fail_null("out");
  return guard([&] { *out = qdpost::purcell_factor(tau_off_ns, tau_on_ns); });
}

qdp_status qdp_coupling_beta(double purcell, double gamma_c_ratio,
                             double* out) {
  if (!out) return fail_null("out");
  return guard([&] { *out = qdpost::coupling_beta(purcell, gamma_c_ratio); });
}

qdp_status qdp_extraction_efficiency(double q_post, double q_planar,
                                     double* out) {
  if (!out) return fail_null("out");
  return guard(
      [&] { *out = qdpost::extraction_efficiency(q_post, q_planar); });
}

qdp_status qdp_expected_total_efficiency(double beta, double eta_extract,
                                         double* out) {
  if (!out) return fail_null("out");
  return guard(
      [&] { *out = qdpost::expected_total_efficiency(beta, eta_extract); });
}

qdp_status qdp_cavity_metrics_eval(double tau_off_ns, double tau_on_ns,
                                   double gamma_c_ratio, double q_post,
                                   double q_planar, double tau_off_err_ns,
                                   double tau_on_err_ns, double q_post_err,
                                   double q_planar_err,
                                   qdp_cavity_metrics* out) {
  if (!out) return fail_null("out");
  return guard([&] {
    const qdpost::CavityMetrics m = qdpost::cavity_metrics(
        tau_off_ns, tau_on_ns, gamma_c_ratio, q_post, q_planar,
        tau_off_err_ns, tau_on_err_ns, q_post_err, q_planar_err);
    out->purcell = m.purcell;
    out->beta = m.beta;
    out->eta_extract = m.eta_extract;
    out->eta_expected = m.eta_expected;
    out->purcell_err = m.purcell_err;
    out->beta_err = m.beta_err;
    out->eta_extract_err = m.eta_extract_err;
    out->eta_expected_err = m.eta_expected_err;
  });
}

qdp_status qdp_mode_waist_estimate(double core_radius_um, double n_core,
                                   double n_clad, double wavelength_um,
                                   double* waist_um, double* v_number) {
  return guard([&] {
    const auto r = qdpost::mode_waist_estimate(core_radius_um, n_core, n_clad,
                                               wavelength_um);
    if (waist_um) *waist_um = r.waist_um;
    if (v_number) *v_number = r.v_number;
  });
}

qdp_status qdp_beam_divergence(double waist_um, double wavelength_um,
                               double medium_index, double* half_angle_rad) {
  if (!half_angle_rad) return fail_null("half_angle_rad");
  return guard([&] {
    const qdpost::GaussianBeam beam{waist_um, wavelength_um, medium_index};
    *half_angle_rad = qdpost::beam_divergence(beam).half_angle_rad;
  });
}

qdp_status qdp_lens_collection_fraction(double divergence_rad,
                                        double lens_half_angle_rad,
                                        double* fraction) {
  if (!fraction) return fail_null("fraction");
  return guard([&] {
    *fraction =
        qdpost::lens_collection_fraction(divergence_rad, lens_half_angle_rad)
            .fraction;
  });
}

qdp_status qdp_lens_half_angle_for_fraction(double divergence_rad,
                                            double target_fraction,
                                            double* half_angle_rad) {
  if (!half_angle_rad) return fail_null("half_angle_rad");
  return guard([&] {
    *half_angle_rad =
        qdpost::lens_half_angle_for_fraction(divergence_rad, target_fraction);
  });
}

qdp_status qdp_run_simulate(const qdp_config* cfg, const char* out_dir,
                            uint32_t n_threads) {
  if (!cfg) return fail_null("cfg");
  if (!out_dir) return fail_null("out_dir");
  return guard(
      [&] { qdpost::run_simulate(cfg->v, out_dir, std::max(1u, n_threads)); });
}

qdp_status qdp_run_analyze(const qdp_config* cfg, const char* input_path,
                           const char* out_dir) {
  if (!cfg) return fail_null("cfg");
  if (!input_path) return fail_null("input_path");
  if (!out_dir) return fail_null("out_dir");
  return guard([&] { qdpost::run_analyze(cfg->v, input_path, out_dir); });
}

qdp_status qdp_run_pipeline(const qdp_config* cfg, const double* powers_uw,
                            size_t n_powers, const char* out_dir,
                            uint32_t n_threads) {
  if (!cfg) return fail_null("cfg");
  if (!out_dir) return fail_null("out_dir");
  if (n_powers > 0 && !powers_uw) return fail_null("powers_uw");
  return guard([&] {
    std::vector<double> powers;
    if (n_powers > 0) powers.assign(powers_uw, powers_uw + n_powers);
    qdpost::run_pipeline(cfg->v, std::move(powers), out_dir,
                         std::max(1u, n_threads));
  });
}

qdp_status qdp_run_optics(const qdp_config* cfg, const char* near_field_path,
                          const char* out_dir) {
  if (!cfg) return fail_null("cfg");
  if (!out_dir) return fail_null("out_dir");
  return guard([&] {
    qdpost::run_optics(cfg->v, near_field_path ? near_field_path : "",
                       out_dir);
  });
}

qdp_status qdp_report_render(const char* report_json_path, char** out_text) {
  if (!report_json_path) return fail_null("report_json_path");
  if (!out_text) return fail_null("out_text");
  return guard([&] {
    const std::string text = qdpost::render_report(report_json_path);
    char* buf = static_cast<char*>(::operator new(text.size() + 1));
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_text = buf;
  });
}

void qdp_string_free(char* s) { ::operator delete(s); }

}  // extern "C"
