#pragma once

#include <span>
#include <vector>

#include "core/detection.hpp"

namespace qdpost {

/// Scaled complementary error function e^(x^2) erfc(x); stable for large
/// positive x where erfc underflows.
double erfcx(double x);

/// Fixed shape of one correlation peak: two-sided exponential decay
/// convolved with the Gaussian instrument response of the pair measurement.
struct PeakTemplateParams {
  double tau_decay_ns = 4.4;
  double sigma_irf_ns = 0.0;
  double rep_period_ns = 13.0;

  void validate() const;
};

/// Unit-area peak density at delay t. Closed form via erfcx; reduces to the
/// pure two-sided exponential for sigma_irf = 0.
double peak_template(double t_ns, const PeakTemplateParams& params);

/// Side-peak count sufficient for truncation error below ~1e-12 of a peak
/// height over the given window (all in-window peaks plus tail cover).
int side_peaks_for_window(double window_ns, const PeakTemplateParams& params);

/// a_central * peak(t) + a_side * sum of side peaks at multiples of the
/// repetition period; overlapping tails are summed.
double correlation_model(double t_ns, double a_central, double a_side,
                         const PeakTemplateParams& params, int n_side_peaks);

struct PeakFitOptions {
  int n_side_peaks = 0;    // 0 = choose from the histogram window
  bool poisson_ml = false; // refine with a Poisson likelihood (low counts)
  bool fit_tau = false;    // diagnostic: also profile the decay constant
};

struct PeakFit {
  double area_central = 0.0;
  double area_side = 0.0;   // one shared area for every side peak
  double g2_zero = 0.0;     // area_central / area_side
  double err_central = 0.0;
  double err_side = 0.0;
  double cov_cs = 0.0;
  double g2_err = 0.0;
  double chi2_dof = 0.0;
  bool clamped = false;     // an unconstrained area came out negative
  double tau_fitted_ns = 0.0;  // set only when options.fit_tau
};

/// Two-parameter weighted least-squares fit of the correlation model to a
/// histogram; tau, sigma and the repetition period are held fixed. The
/// model is linear in both areas, so the solution comes from the normal
/// equations; Poisson weights max(counts, 1) by default.
PeakFit fit_peak_areas(const CorrelationHistogram& hist,
                       const PeakTemplateParams& params,
                       const PeakFitOptions& options = {});

/// Same fit on real-valued bin contents (pre-scaled or synthetic data).
/// Bins of width bin_width_ns cover [-window_ns, +window_ns].
PeakFit fit_peak_areas(double bin_width_ns, double window_ns,
                       std::span<const double> counts,
                       const PeakTemplateParams& params,
                       const PeakFitOptions& options = {});

/// Diagnostic fit with an independent area per peak (bunching/blinking
/// check). Returns areas ordered from -n_side to +n_side.
std::vector<double> fit_per_peak_areas(const CorrelationHistogram& hist,
                                       const PeakTemplateParams& params,
                                       int n_side_peaks = 0);

/// Upper bound on P(n >= 2) per pulse: (1/2) n_mean^2 g2_zero.
double multiphoton_bound(double n_mean, double g2_zero);

/// Mean photon number per pulse from the detected rate, the pulse rate and
/// the collection-and-detection efficiency of the apparatus.
double mean_photon_number(double count_rate_per_s, double rep_rate_per_s,
                          double detection_eff);

/// Device efficiency of a regulated-photon + Poissonian-background mixture:
/// n_mean * sqrt(1 - g2_zero). Rejects g2_zero > 1, where the mixture model
/// has no real solution.
double single_photon_efficiency(double n_mean, double g2_zero);

double purcell_factor(double tau_off_ns, double tau_on_ns);
double coupling_beta(double purcell, double gamma_c_ratio);
double extraction_efficiency(double q_post, double q_planar);
double expected_total_efficiency(double beta, double eta_extract);

struct CavityMetrics {
  double q_post = 0.0;
  double q_planar = 0.0;
  double purcell = 0.0;
  double beta = 0.0;
  double eta_extract = 0.0;
  double eta_expected = 0.0;
  double purcell_err = 0.0;
  double beta_err = 0.0;
  double eta_extract_err = 0.0;
  double eta_expected_err = 0.0;
};

/// Derived cavity figures of merit with first-order error propagation.
CavityMetrics cavity_metrics(double tau_off_ns, double tau_on_ns,
                             double gamma_c_ratio, double q_post,
                             double q_planar, double tau_off_err_ns = 0.0,
                             double tau_on_err_ns = 0.0,
                             double q_post_err = 0.0,
                             double q_planar_err = 0.0);

}  // namespace qdpost
