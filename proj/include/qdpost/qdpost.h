/* qdpost: simulation and analysis toolkit for triggered single-photon
 * sources (quantum dot in a micropost microcavity).
 *
 * C API of the shared library. All state lives behind opaque handles;
 * functions return qdp_status (QDP_OK on success) and report the failure
 * message of the calling thread via qdp_last_error(). Scalar results are
 * written through out-pointers, which may be NULL when not wanted.
 *
 * Units: times ns, pump powers uW, wavelengths nm at this interface
 * (except where a name says otherwise), rates s^-1, angles rad.
 */
#ifndef QDPOST_QDPOST_H
#define QDPOST_QDPOST_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t qdp_status;

enum {
  QDP_OK = 0,
  QDP_ERR_DOMAIN = 1,    /* parameter outside its mathematical domain */
  QDP_ERR_CONFIG = 2,    /* bad config file or field */
  QDP_ERR_IO = 3,        /* file system or parse failure */
  QDP_ERR_FIT = 4,       /* fit failed (singular / no convergence) */
  QDP_ERR_NULL = 5,      /* required pointer argument was NULL */
  QDP_ERR_INTERNAL = 6
};

/* version string "major.minor.patch" (static storage) */
const char* qdp_version(void);

/* message for the most recent failure on this thread ("" if none) */
const char* qdp_last_error(void);

/* --- opaque handles ------------------------------------------------- */

typedef struct qdp_config qdp_config;
typedef struct qdp_stream qdp_stream;       /* emission events */
typedef struct qdp_records qdp_records;     /* detection timestamps */
typedef struct qdp_histogram qdp_histogram; /* correlation histogram */

void qdp_config_free(qdp_config* cfg);
void qdp_stream_free(qdp_stream* stream);
void qdp_records_free(qdp_records* records);
void qdp_histogram_free(qdp_histogram* hist);

/* --- configuration --------------------------------------------------- */

/* defaults calibrated to the reference device (lifetimes, Qs, efficiencies) */
qdp_status qdp_config_default(qdp_config** out);
qdp_status qdp_config_load(const char* path, qdp_config** out);
qdp_status qdp_config_parse(const char* json_text, qdp_config** out);
qdp_status qdp_config_save(const qdp_config* cfg, const char* path);

qdp_status qdp_config_set_seed(qdp_config* cfg, uint64_t seed);
qdp_status qdp_config_set_n_pulses(qdp_config* cfg, uint64_t n_pulses);
qdp_status qdp_config_set_pump_power(qdp_config* cfg, double power_uw);
qdp_status qdp_config_get_seed(const qdp_config* cfg, uint64_t* out);

/* 16 hex digits + NUL; buffer must hold at least 17 bytes */
qdp_status qdp_config_hash(const qdp_config* cfg, char* buf, size_t buf_len);

/* --- source model ----------------------------------------------------- */

qdp_status qdp_excitation_probability(double pump_power_uw, double p_sat_uw,
                                      double* out);
qdp_status qdp_background_mean(double pump_power_uw, double amplitude,
                               double power_exponent, double p_sat_uw,
                               double* out);

qdp_status qdp_simulate_stream(const qdp_config* cfg, qdp_stream** out);
qdp_status qdp_stream_size(const qdp_stream* stream, uint64_t* out);
/* origin: 0 = line photon, 1 = background; polarization: 0 = linear,
 * 1 = unpolarized */
qdp_status qdp_stream_event(const qdp_stream* stream, uint64_t index,
                            uint64_t* pulse_index, double* time_ns,
                            int32_t* origin, int32_t* polarization);
qdp_status qdp_stream_write_csv(const qdp_stream* stream, const char* path);

/* --- detection chain --------------------------------------------------- */

qdp_status qdp_polarizer_transmission(double polarized_fraction,
                                      double* linear, double* unpol,
                                      double* ensemble);
/* polarization as in qdp_stream_event */
qdp_status qdp_channel_transmission(const qdp_config* cfg,
                                    int32_t polarization, double* out);

qdp_status qdp_detect(const qdp_config* cfg, const qdp_stream* stream,
                      qdp_records** out);
qdp_status qdp_records_counts(const qdp_records* records, uint64_t* n_d1,
                              uint64_t* n_d2);
/* detector: 0 = D1, 1 = D2 */
qdp_status qdp_records_time(const qdp_records* records, int32_t detector,
                            uint64_t index, double* time_ns);
qdp_status qdp_records_write_csv(const qdp_records* records, const char* path);
qdp_status qdp_records_read_csv(const char* path, qdp_records** out);
qdp_status qdp_count_rate(const qdp_records* records, double duration_ns,
                          double* rate_per_s);

/* mode: 0 = all pairs, 1 = start-stop */
qdp_status qdp_build_histogram(const qdp_records* records, double bin_width_ns,
                               double window_ns, int32_t mode,
                               qdp_histogram** out);
qdp_status qdp_histogram_n_bins(const qdp_histogram* hist, uint64_t* out);
qdp_status qdp_histogram_bin(const qdp_histogram* hist, uint64_t index,
                             double* center_ns, uint64_t* counts);
qdp_status qdp_histogram_write_csv(const qdp_histogram* hist,
                                   const char* path);
qdp_status qdp_histogram_read_csv(const char* path, qdp_histogram** out);

/* --- correlation analysis ---------------------------------------------- */

/* unit-area two-sided exponential convolved with a Gaussian IRF */
qdp_status qdp_peak_template(double t_ns, double tau_decay_ns,
                             double sigma_irf_ns, double* out);
qdp_status qdp_correlation_model(double t_ns, double area_central,
                                 double area_side, double tau_decay_ns,
                                 double sigma_irf_ns, double rep_period_ns,
                                 int32_t n_side_peaks, double* out);

typedef struct {
  double area_central;
  double area_side;
  double g2_zero;
  double g2_err;
  double area_central_err;
  double area_side_err;
  double cov_central_side;
  double chi2_dof;
  int32_t clamped;
} qdp_peak_fit;

qdp_status qdp_fit_peak_areas(const qdp_histogram* hist, double tau_decay_ns,
                              double sigma_irf_ns, double rep_period_ns,
                              qdp_peak_fit* out);

qdp_status qdp_multiphoton_bound(double n_mean, double g2_zero, double* out);
qdp_status qdp_mean_photon_number(double count_rate_per_s,
                                  double rep_rate_per_s, double detection_eff,
                                  double* out);
qdp_status qdp_single_photon_efficiency(double n_mean, double g2_zero,
                                        double* out);

typedef struct {
  double eta_max;
  double p_sat_uw;
  double eta_max_err;
  double p_sat_err_uw;
  double chi2_dof;
  int32_t p_sat_identifiable;
} qdp_saturation_fit;

qdp_status qdp_fit_saturation(const double* power_uw, const double* eta,
                              size_t n, qdp_saturation_fit* out);

typedef struct {
  double tau_ns;
  double tau_err_ns;
} qdp_lifetime_fit;

/* start_ns < 0 starts the tail at the peak bin */
qdp_status qdp_fit_lifetime(const double* bin_centers_ns, const double* counts,
                            size_t n, double start_ns, qdp_lifetime_fit* out);

typedef struct {
  double amplitude;
  double center_nm;
  double fwhm_nm;
  double offset;
  double center_err_nm;
  double fwhm_err_nm;
  double q;
  double q_err;
  double chi2_dof;
} qdp_lorentzian_fit;

qdp_status qdp_fit_lorentzian(const double* wavelength_nm,
                              const double* intensity, size_t n,
                              qdp_lorentzian_fit* out);

qdp_status qdp_purcell_factor(double tau_off_ns, double tau_on_ns,
                              double* out);
qdp_status qdp_coupling_beta(double purcell, double gamma_c_ratio,
                             double* out);
qdp_status qdp_extraction_efficiency(double q_post, double q_planar,
                                     double* out);
qdp_status qdp_expected_total_efficiency(double beta, double eta_extract,
                                         double* out);

typedef struct {
  double purcell;
  double beta;
  double eta_extract;
  double eta_expected;
  double purcell_err;
  double beta_err;
  double eta_extract_err;
  double eta_expected_err;
} qdp_cavity_metrics;

qdp_status qdp_cavity_metrics_eval(double tau_off_ns, double tau_on_ns,
                                   double gamma_c_ratio, double q_post,
                                   double q_planar, double tau_off_err_ns,
                                   double tau_on_err_ns, double q_post_err,
                                   double q_planar_err,
                                   qdp_cavity_metrics* out);

/* --- beam optics -------------------------------------------------------- */

qdp_status qdp_mode_waist_estimate(double core_radius_um, double n_core,
                                   double n_clad, double wavelength_um,
                                   double* waist_um, double* v_number);
qdp_status qdp_beam_divergence(double waist_um, double wavelength_um,
                               double medium_index, double* half_angle_rad);
qdp_status qdp_lens_collection_fraction(double divergence_rad,
                                        double lens_half_angle_rad,
                                        double* fraction);
qdp_status qdp_lens_half_angle_for_fraction(double divergence_rad,
                                            double target_fraction,
                                            double* half_angle_rad);

/* --- command entry points (what the CLI calls) --------------------------- */

/* n_threads is an execution parameter, never part of the experiment config;
 * results are identical for any value */
qdp_status qdp_run_simulate(const qdp_config* cfg, const char* out_dir,
                            uint32_t n_threads);
qdp_status qdp_run_analyze(const qdp_config* cfg, const char* input_path,
                           const char* out_dir);
/* powers may be NULL/0 to use the configured pipeline powers */
qdp_status qdp_run_pipeline(const qdp_config* cfg, const double* powers_uw,
                            size_t n_powers, const char* out_dir,
                            uint32_t n_threads);
/* near_field_path may be NULL for a parameters-only optics report */
qdp_status qdp_run_optics(const qdp_config* cfg, const char* near_field_path,
                          const char* out_dir);

/* render a report.json as text; free the result with qdp_string_free */
qdp_status qdp_report_render(const char* report_json_path, char** out_text);
void qdp_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* QDPOST_QDPOST_H */
