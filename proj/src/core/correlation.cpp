#include "core/correlation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace qdpost {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

// 5-point Gauss-Legendre nodes/weights on [-1, 1]
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

}  // namespace

double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 6.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series; terms fall below machine epsilon well before the
  // series starts to diverge for x >= 6
  const double ix2 = 1.0 / (x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 24; ++k) {
    term *= -0.5 * (2 * k - 1) * ix2;
    const double prev = sum;
    sum += term;
    if (sum == prev) break;
  }
  return sum / (x * kSqrtPi);
}

void PeakTemplateParams::validate() const {
  if (!(tau_decay_ns > 0.0))
    throw DomainError("peak_template: tau_decay must be > 0");
  if (!(sigma_irf_ns >= 0.0))
    throw DomainError("peak_template: sigma_irf must be >= 0");
  if (!(rep_period_ns > 0.0))
    throw DomainError("peak_template: rep_period must be > 0");
}

double peak_template(double t_ns, const PeakTemplateParams& params) {
  params.validate();
  const double tau = params.tau_decay_ns;
  const double sigma = params.sigma_irf_ns;
  const double at = std::abs(t_ns);
  if (sigma == 0.0) return std::exp(-at / tau) / (2.0 * tau);

  const double a = sigma / (std::numbers::sqrt2 * tau);
  const double b = at / (std::numbers::sqrt2 * sigma);
  const double gauss = std::exp(-at * at / (2.0 * sigma * sigma));
  double left;
  if (a - b < 0.0) {
    // reflected erfcx keeps both factors representable when t >> sigma
    left = 2.0 * std::exp(sigma * sigma / (2.0 * tau * tau) - at / tau) -
           gauss * erfcx(b - a);
  } else {
    left = gauss * erfcx(a - b);
  }
  const double right = gauss * erfcx(a + b);
  return (left + right) / (4.0 * tau);
}

int side_peaks_for_window(double window_ns, const PeakTemplateParams& params) {
  params.validate();
  if (!(window_ns > 0.0))
    throw DomainError("side_peaks_for_window: window must be > 0");
  const int in_window =
      static_cast<int>(std::floor(window_ns / params.rep_period_ns));
  // ln(1e12) * tau of extra reach past the window edge
  const int tail = static_cast<int>(
      std::ceil(27.7 * params.tau_decay_ns / params.rep_period_ns));
  return in_window + std::max(2, tail);
}

double correlation_model(double t_ns, double a_central, double a_side,
                         const PeakTemplateParams& params, int n_side_peaks) {
  if (n_side_peaks < 0)
    throw DomainError("correlation_model: n_side_peaks must be >= 0");
  double v = a_central * peak_template(t_ns, params);
  for (int k = 1; k <= n_side_peaks; ++k) {
    const double shift = static_cast<double>(k) * params.rep_period_ns;
    v += a_side * (peak_template(t_ns - shift, params) +
                   peak_template(t_ns + shift, params));
  }
  return v;
}

namespace {

// integral of the peak template over one bin (5-point Gauss-Legendre)
double bin_integral(double center, double half_width, double shift,
                    const PeakTemplateParams& params) {
  double s = 0.0;
  for (int i = 0; i < 5; ++i)
    s += kGlWeight[i] *
         peak_template(center + half_width * kGlNode[i] - shift, params);
  return s * half_width;
}

struct BinGeometry {
  double bin_width;
  double window;
  std::size_t n_bins;
  double center(std::size_t i) const {
    return -window + (static_cast<double>(i) + 0.5) * bin_width;
  }
};

struct DesignMatrix {
  std::vector<double> central;  // expected counts for unit central area
  std::vector<double> side;     // expected counts for unit shared side area
};

DesignMatrix build_design(const BinGeometry& geo,
                          const PeakTemplateParams& params, int n_side) {
  DesignMatrix d;
  d.central.resize(geo.n_bins);
  d.side.resize(geo.n_bins);
  const double hw = 0.5 * geo.bin_width;
  for (std::size_t j = 0; j < geo.n_bins; ++j) {
    const double c = geo.center(j);
    d.central[j] = bin_integral(c, hw, 0.0, params);
    double s = 0.0;
    for (int k = 1; k <= n_side; ++k) {
      const double shift = static_cast<double>(k) * params.rep_period_ns;
      s += bin_integral(c, hw, shift, params) +
           bin_integral(c, hw, -shift, params);
    }
    d.side[j] = s;
  }
  return d;
}

struct LinearSolution {
  double a0, as;
  Eigen::Matrix2d cov;
  bool clamped;
};

LinearSolution solve_areas(const DesignMatrix& d,
                           std::span<const double> counts) {
  const std::size_t n = counts.size();
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Eigen::Vector2d aty = Eigen::Vector2d::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    const double y = counts[j];
    const double w = 1.0 / std::max(y, 1.0);
    const Eigen::Vector2d x(d.central[j], d.side[j]);
    ata += w * x * x.transpose();
    aty += w * x * y;
  }
  const double scale = ata.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::abs(ata.determinant()) < 1e-14 * scale * scale)
    throw FitError("fit_peak_areas: singular design (empty histogram?)");

  Eigen::Vector2d sol = ata.ldlt().solve(aty);
  bool clamped = false;
  if (sol(0) < 0.0) {
    clamped = true;
    sol(0) = 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double y = counts[j];
      const double w = 1.0 / std::max(y, 1.0);
      num += w * d.side[j] * y;
      den += w * d.side[j] * d.side[j];
    }
    sol(1) = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
  } else if (sol(1) < 0.0) {
    clamped = true;
    sol(1) = 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double y = counts[j];
      const double w = 1.0 / std::max(y, 1.0);
      num += w * d.central[j] * y;
      den += w * d.central[j] * d.central[j];
    }
    sol(0) = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
  }
  return {sol(0), sol(1), ata.inverse(), clamped};
}

// Poisson maximum-likelihood refinement by damped Newton steps; used when
// bin counts are too low for the chi-squared weights to be trustworthy.
void refine_poisson_ml(const DesignMatrix& d, std::span<const double> counts,
                       double& a0, double& as) {
  const std::size_t n = counts.size();
  for (int iter = 0; iter < 60; ++iter) {
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::Vector2d x(d.central[j], d.side[j]);
      const double mu = std::max(a0 * x(0) + as * x(1), 1e-300);
      const double y = counts[j];
      grad += (y / mu - 1.0) * x;
      hess += (y / (mu * mu)) * x * x.transpose();
    }
    if (std::abs(hess.determinant()) < 1e-30) break;
    Eigen::Vector2d step = hess.ldlt().solve(grad);
    double lambda = 1.0;
    // halve until the step keeps both areas non-negative
    while (lambda > 1e-6 &&
           (a0 + lambda * step(0) < 0.0 || as + lambda * step(1) < 0.0))
      lambda *= 0.5;
    a0 += lambda * step(0);
    as += lambda * step(1);
    if (step.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, a0 + as)) break;
  }
}

PeakFit assemble_fit(const DesignMatrix& d, std::span<const double> counts,
                     const LinearSolution& lsq) {
  PeakFit fit;
  fit.area_central = lsq.a0;
  fit.area_side = lsq.as;
  fit.clamped = lsq.clamped;
  fit.err_central = std::sqrt(std::max(lsq.cov(0, 0), 0.0));
  fit.err_side = std::sqrt(std::max(lsq.cov(1, 1), 0.0));
  fit.cov_cs = lsq.cov(0, 1);

  if (!(lsq.as > 0.0))
    throw FitError("fit_peak_areas: side-peak area is zero; g2 is undefined");
  fit.g2_zero = lsq.a0 / lsq.as;

  const double ra = fit.err_central / lsq.as;
  const double rb = lsq.a0 * fit.err_side / (lsq.as * lsq.as);
  double var = ra * ra + rb * rb -
               2.0 * lsq.a0 * fit.cov_cs / (lsq.as * lsq.as * lsq.as);
  fit.g2_err = std::sqrt(std::max(var, 0.0));

  double chi2 = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double y = counts[j];
    const double m = lsq.a0 * d.central[j] + lsq.as * d.side[j];
    const double r = y - m;
    chi2 += r * r / std::max(y, 1.0);
  }
  const double dof = static_cast<double>(counts.size()) - 2.0;
  fit.chi2_dof = dof > 0.0 ? chi2 / dof : 0.0;
  return fit;
}

}  // namespace

PeakFit fit_peak_areas(const CorrelationHistogram& hist,
                       const PeakTemplateParams& params,
                       const PeakFitOptions& options) {
  std::vector<double> counts(hist.counts.begin(), hist.counts.end());
  return fit_peak_areas(hist.bin_width_ns, hist.window_ns, counts, params,
                        options);
}

PeakFit fit_peak_areas(double bin_width_ns, double window_ns,
                       std::span<const double> counts,
                       const PeakTemplateParams& params,
                       const PeakFitOptions& options) {
  params.validate();
  if (!(bin_width_ns > 0.0) || !(window_ns > 0.0))
    throw DomainError("fit_peak_areas: bin width and window must be > 0");
  if (counts.size() < 3)
    throw FitError("fit_peak_areas: histogram has too few bins");
  const BinGeometry geo{bin_width_ns, window_ns, counts.size()};
  const int n_side = options.n_side_peaks > 0
                         ? options.n_side_peaks
                         : side_peaks_for_window(window_ns, params);

  if (!options.fit_tau) {
    const DesignMatrix d = build_design(geo, params, n_side);
    LinearSolution lsq = solve_areas(d, counts);
    if (options.poisson_ml) {
      refine_poisson_ml(d, counts, lsq.a0, lsq.as);
      lsq.clamped = lsq.clamped || lsq.a0 == 0.0 || lsq.as == 0.0;
    }
    return assemble_fit(d, counts, lsq);
  }

  // diagnostic mode: profile tau by golden-section on the WLS chi^2
  auto chi2_at = [&](double tau) {
    PeakTemplateParams p = params;
    p.tau_decay_ns = tau;
    const DesignMatrix d = build_design(geo, p, n_side);
    const LinearSolution lsq = solve_areas(d, counts);
    double chi2 = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const double y = counts[j];
      const double m = lsq.a0 * d.central[j] + lsq.as * d.side[j];
      chi2 += (y - m) * (y - m) / std::max(y, 1.0);
    }
    return chi2;
  };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(params.tau_decay_ns * 0.2);
  double hi = std::log(params.tau_decay_ns * 5.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = chi2_at(std::exp(x1)), f2 = chi2_at(std::exp(x2));
  for (int i = 0; i < 80; ++i) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = chi2_at(std::exp(x1));
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = chi2_at(std::exp(x2));
    }
  }
  PeakTemplateParams best = params;
  best.tau_decay_ns = std::exp(0.5 * (lo + hi));
  const DesignMatrix d = build_design(geo, best, n_side);
  const LinearSolution lsq = solve_areas(d, counts);
  PeakFit fit = assemble_fit(d, counts, lsq);
  fit.tau_fitted_ns = best.tau_decay_ns;
  return fit;
}

std::vector<double> fit_per_peak_areas(const CorrelationHistogram& hist,
                                       const PeakTemplateParams& params,
                                       int n_side_peaks) {
  params.validate();
  const int n_side = n_side_peaks > 0
                         ? n_side_peaks
                         : static_cast<int>(std::floor(
                               hist.window_ns / params.rep_period_ns));
  const int n_par = 2 * n_side + 1;
  const std::size_t n = hist.n_bins();
  Eigen::MatrixXd x(n, n_par);
  Eigen::VectorXd y(n), w(n);
  const double hw = 0.5 * hist.bin_width_ns;
  for (std::size_t j = 0; j < n; ++j) {
    const double c = hist.bin_center(j);
    for (int k = -n_side; k <= n_side; ++k)
      x(j, k + n_side) =
          bin_integral(c, hw, static_cast<double>(k) * params.rep_period_ns,
                       params);
    y(j) = static_cast<double>(hist.counts[j]);
    w(j) = 1.0 / std::max(y(j), 1.0);
  }
  const Eigen::MatrixXd xw = w.asDiagonal() * x;
  const Eigen::MatrixXd ata = x.transpose() * xw;
  const Eigen::VectorXd aty = x.transpose() * (w.asDiagonal() * y);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
  if (ldlt.info() != Eigen::Success)
    throw FitError("fit_per_peak_areas: singular design");
  const Eigen::VectorXd sol = ldlt.solve(aty);
  return {sol.data(), sol.data() + n_par};
}

double multiphoton_bound(double n_mean, double g2_zero) {
  if (!(n_mean >= 0.0))
    throw DomainError("multiphoton_bound: n_mean must be >= 0");
  if (!(g2_zero >= 0.0))
    throw DomainError("multiphoton_bound: g2_zero must be >= 0");
  return 0.5 * n_mean * n_mean * g2_zero;
}

double mean_photon_number(double count_rate_per_s, double rep_rate_per_s,
                          double detection_eff) {
  if (!(rep_rate_per_s > 0.0))
    throw DomainError("mean_photon_number: rep rate must be > 0");
  if (!(detection_eff > 0.0 && detection_eff <= 1.0))
    throw DomainError("mean_photon_number: detection efficiency must be in (0, 1]");
  if (!(count_rate_per_s >= 0.0))
    throw DomainError("mean_photon_number: count rate must be >= 0");
  return count_rate_per_s / (rep_rate_per_s * detection_eff);
}

double single_photon_efficiency(double n_mean, double g2_zero) {
  if (!(n_mean >= 0.0))
    throw DomainError("single_photon_efficiency: n_mean must be >= 0");
  if (!(g2_zero >= 0.0))
    throw DomainError("single_photon_efficiency: g2_zero must be >= 0");
  if (g2_zero > 1.0)
    throw DomainError(
        "single_photon_efficiency: g2_zero > 1; the regulated-photon plus "
        "Poissonian-background mixture has no real efficiency there");
  return n_mean * std::sqrt(1.0 - g2_zero);
}

double purcell_factor(double tau_off_ns, double tau_on_ns) {
  if (!(tau_off_ns > 0.0) || !(tau_on_ns > 0.0))
    throw DomainError("purcell_factor: lifetimes must be > 0");
  return tau_off_ns / tau_on_ns;
}

double coupling_beta(double purcell, double gamma_c_ratio) {
  if (!(purcell > 0.0)) throw DomainError("coupling_beta: purcell must be > 0");
  if (!(gamma_c_ratio >= 0.0 && gamma_c_ratio <= 1.0))
    throw DomainError("coupling_beta: gamma_c_ratio must be in [0, 1]");
  return 1.0 - (1.0 - gamma_c_ratio) / purcell;
}

double extraction_efficiency(double q_post, double q_planar) {
  if (!(q_post > 0.0) || !(q_planar > 0.0))
    throw DomainError("extraction_efficiency: quality factors must be > 0");
  return q_post / q_planar;
}

double expected_total_efficiency(double beta, double eta_extract) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw DomainError("expected_total_efficiency: beta must be in [0, 1]");
  if (!(eta_extract >= 0.0 && eta_extract <= 1.0))
    throw DomainError("expected_total_efficiency: eta_extract must be in [0, 1]");
  return beta * eta_extract;
}

CavityMetrics cavity_metrics(double tau_off_ns, double tau_on_ns,
                             double gamma_c_ratio, double q_post,
                             double q_planar, double tau_off_err_ns,
                             double tau_on_err_ns, double q_post_err,
                             double q_planar_err) {
  CavityMetrics m;
  m.q_post = q_post;
  m.q_planar = q_planar;
  m.purcell = purcell_factor(tau_off_ns, tau_on_ns);
  m.beta = coupling_beta(m.purcell, gamma_c_ratio);
  m.eta_extract = extraction_efficiency(q_post, q_planar);
  m.eta_expected = m.beta * m.eta_extract;

  auto rel = [](double err, double val) { return val != 0.0 ? err / val : 0.0; };
  m.purcell_err = m.purcell * std::hypot(rel(tau_off_err_ns, tau_off_ns),
                                         rel(tau_on_err_ns, tau_on_ns));
  // beta = 1 - (1 - r)/F  =>  d beta = (1 - r)/F^2 dF
  m.beta_err = (1.0 - gamma_c_ratio) / (m.purcell * m.purcell) * m.purcell_err;
  m.eta_extract_err = m.eta_extract * std::hypot(rel(q_post_err, q_post),
                                                 rel(q_planar_err, q_planar));
  m.eta_expected_err = m.eta_expected * std::hypot(rel(m.beta_err, m.beta),
                                                   rel(m.eta_extract_err,
                                                       m.eta_extract));
  return m;
}

}  // namespace qdpost
