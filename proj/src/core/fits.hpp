#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qdpost {

// --- saturation fit: eta = eta_max * (1 - e^(-P / P_sat)) ---

double saturation_model(double power, double eta_max, double p_sat);

/// Analytic partials of the saturation model, for covariance and for the
/// finite-difference cross-checks.
void saturation_gradient(double power, double eta_max, double p_sat,
                         double* d_eta_max, double* d_p_sat);

struct SaturationFit {
  double eta_max = 0.0;
  double p_sat = 0.0;
  double eta_max_err = 0.0;
  double p_sat_err = 0.0;
  double chi2_dof = 0.0;
  bool p_sat_identifiable = true;
};

/// eta_max enters linearly and is profiled out in closed form; P_sat comes
/// from a bracketed log-grid scan refined by golden section. Points are
/// weighted by 1/eta^2, matching data with constant relative error.
SaturationFit fit_saturation(std::span<const double> power_uw,
                             std::span<const double> eta);

// --- exponential lifetime fit (binned maximum likelihood on the tail) ---

struct LifetimeFit {
  double tau_ns = 0.0;
  double tau_err_ns = 0.0;
  std::size_t start_bin = 0;
  double log_likelihood = 0.0;
};

/// Binned log-likelihood of an exponential tail, normalized over the
/// observed support; exposed for the gradient cross-check tests.
double lifetime_loglike(std::span<const double> bin_centers,
                        std::span<const double> counts, std::size_t start_bin,
                        double tau_ns);
double lifetime_dloglike(std::span<const double> bin_centers,
                         std::span<const double> counts, std::size_t start_bin,
                         double tau_ns);

/// Fit the decay constant of an arrival-time histogram. The fit starts at
/// the peak bin by default (start_ns < 0) or at the first bin at/after
/// start_ns; uncertainty from the curvature of the log-likelihood.
LifetimeFit fit_lifetime(std::span<const double> bin_centers,
                         std::span<const double> counts, double start_ns = -1.0);

// --- Lorentzian line fit ---

struct SpectrumSample {
  double wavelength_nm;
  double intensity;
};

/// p = {amplitude, center, fwhm, offset}
double lorentzian_model(double x, const double p[4]);
void lorentzian_gradient(double x, const double p[4], double grad[4]);

struct LorentzianFit {
  double amplitude = 0.0;
  double center_nm = 0.0;
  double fwhm_nm = 0.0;
  double offset = 0.0;
  double center_err_nm = 0.0;
  double fwhm_err_nm = 0.0;
  double q = 0.0;      // center / fwhm
  double q_err = 0.0;
  double chi2_dof = 0.0;
  int iterations = 0;
};

/// Levenberg-Marquardt fit of amplitude, center, FWHM and constant offset;
/// Q = center / FWHM.
LorentzianFit fit_lorentzian(std::span<const double> wavelength_nm,
                             std::span<const double> intensity);
LorentzianFit fit_lorentzian(const std::vector<SpectrumSample>& spectrum);

}  // namespace qdpost
