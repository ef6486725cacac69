#include "core/fits.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace qdpost {

namespace {

constexpr double kGolden = 0.6180339887498949;

// golden-section minimum of f over [lo, hi]
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters) {
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double saturation_model(double power, double eta_max, double p_sat) {
  return eta_max * -std::expm1(-power / p_sat);
}

void saturation_gradient(double power, double eta_max, double p_sat,
                         double* d_eta_max, double* d_p_sat) {
  const double f = -std::expm1(-power / p_sat);
  if (d_eta_max) *d_eta_max = f;
  if (d_p_sat)
    *d_p_sat = -eta_max * std::exp(-power / p_sat) * power / (p_sat * p_sat);
}

SaturationFit fit_saturation(std::span<const double> power_uw,
                             std::span<const double> eta) {
  if (power_uw.size() != eta.size())
    throw DomainError("fit_saturation: power and eta sizes differ");
  const std::size_t n = power_uw.size();
  if (n < 3) throw FitError("fit_saturation: need at least 3 points");
  std::vector<double> distinct(power_uw.begin(), power_uw.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3)
    throw FitError("fit_saturation: need at least 3 distinct powers");

  double p_min = std::numeric_limits<double>::max();
  double p_max = 0.0;
  for (double p : power_uw) {
    if (!(p >= 0.0)) throw DomainError("fit_saturation: powers must be >= 0");
    if (p > 0.0) p_min = std::min(p_min, p);
    p_max = std::max(p_max, p);
  }
  if (!(p_max > 0.0)) throw FitError("fit_saturation: all powers are zero");

  // efficiency data carries roughly constant relative error, so weight by
  // 1/eta^2 (floored against zero values)
  double eta_scale = 0.0;
  for (double e : eta) eta_scale = std::max(eta_scale, std::abs(e));
  if (!(eta_scale > 0.0))
    throw FitError("fit_saturation: all efficiencies are zero");
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double floor = 1e-3 * eta_scale;
    const double s = std::max(std::abs(eta[i]), floor);
    weight[i] = 1.0 / (s * s);
  }

  auto eta_max_at = [&](double p_sat) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = -std::expm1(-power_uw[i] / p_sat);
      num += weight[i] * f * eta[i];
      den += weight[i] * f * f;
    }
    return den > 0.0 ? num / den : 0.0;
  };
  auto sse_at = [&](double p_sat) {
    const double em = eta_max_at(p_sat);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = eta[i] - saturation_model(power_uw[i], em, p_sat);
      s += weight[i] * r * r;
    }
    return s;
  };

  const double lo = std::log(p_min / 30.0);
  const double hi = std::log(p_max * 30.0);
  const int n_grid = 240;
  int best = 0;
  double best_sse = std::numeric_limits<double>::max();
  for (int i = 0; i < n_grid; ++i) {
    const double lp = lo + (hi - lo) * i / (n_grid - 1);
    const double s = sse_at(std::exp(lp));
    if (s < best_sse) {
      best_sse = s;
      best = i;
    }
  }
  const double step = (hi - lo) / (n_grid - 1);
  const double blo = lo + step * std::max(best - 1, 0);
  const double bhi = lo + step * std::min(best + 1, n_grid - 1);
  const double log_psat =
      golden_min([&](double lp) { return sse_at(std::exp(lp)); }, blo, bhi, 90);

  SaturationFit fit;
  fit.p_sat = std::exp(log_psat);
  fit.eta_max = eta_max_at(fit.p_sat);
  const double sse = sse_at(fit.p_sat);
  fit.chi2_dof = n > 2 ? sse / static_cast<double>(n - 2) : 0.0;

  Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    double de, dp;
    saturation_gradient(power_uw[i], fit.eta_max, fit.p_sat, &de, &dp);
    const Eigen::Vector2d g(de, dp);
    jtj += weight[i] * g * g.transpose();
  }
  const double scale = jtj.cwiseAbs().maxCoeff();
  if (scale > 0.0 && std::abs(jtj.determinant()) > 1e-12 * scale * scale) {
    const Eigen::Matrix2d cov = jtj.inverse() * fit.chi2_dof;
    fit.eta_max_err = std::sqrt(std::max(cov(0, 0), 0.0));
    fit.p_sat_err = std::sqrt(std::max(cov(1, 1), 0.0));
  } else {
    // plateau data: P_sat has no leverage
    fit.eta_max_err = 0.0;
    fit.p_sat_err = std::numeric_limits<double>::infinity();
  }
  const bool at_edge = best == 0 || best == n_grid - 1;
  fit.p_sat_identifiable =
      !at_edge && std::isfinite(fit.p_sat_err) && fit.p_sat_err < fit.p_sat;
  return fit;
}

// --- lifetime ---

namespace {

struct TailGeometry {
  double width;
  double span;  // start of first bin to end of last bin
};

TailGeometry tail_geometry(std::span<const double> centers,
                           std::size_t start_bin) {
  if (centers.size() < 2)
    throw FitError("fit_lifetime: need at least 2 bins");
  const double w = centers[1] - centers[0];
  if (!(w > 0.0))
    throw DomainError("fit_lifetime: bin centers must be increasing");
  for (std::size_t i = 1; i < centers.size(); ++i) {
    const double d = centers[i] - centers[i - 1];
    if (std::abs(d - w) > 1e-9 * std::max(1.0, std::abs(w)))
      throw DomainError("fit_lifetime: bins must be uniform");
  }
  const double span =
      (static_cast<double>(centers.size() - start_bin)) * w;
  return {w, span};
}

}  // namespace

double lifetime_loglike(std::span<const double> bin_centers,
                        std::span<const double> counts, std::size_t start_bin,
                        double tau_ns) {
  const auto geo = tail_geometry(bin_centers, start_bin);
  const double t0 = bin_centers[start_bin] - 0.5 * geo.width;
  double sum_cx = 0.0, total = 0.0;
  for (std::size_t j = start_bin; j < counts.size(); ++j) {
    const double x = bin_centers[j] - 0.5 * geo.width - t0;
    sum_cx += counts[j] * x;
    total += counts[j];
  }
  // log P(bin) = -x/tau + ln(1 - e^(-w/tau)) - ln(1 - e^(-span/tau))
  return -sum_cx / tau_ns +
         total * (std::log(-std::expm1(-geo.width / tau_ns)) -
                  std::log(-std::expm1(-geo.span / tau_ns)));
}

double lifetime_dloglike(std::span<const double> bin_centers,
                         std::span<const double> counts, std::size_t start_bin,
                         double tau_ns) {
  const auto geo = tail_geometry(bin_centers, start_bin);
  const double t0 = bin_centers[start_bin] - 0.5 * geo.width;
  double sum_cx = 0.0, total = 0.0;
  for (std::size_t j = start_bin; j < counts.size(); ++j) {
    const double x = bin_centers[j] - 0.5 * geo.width - t0;
    sum_cx += counts[j] * x;
    total += counts[j];
  }
  const double t2 = tau_ns * tau_ns;
  auto boundary = [&](double length) {
    const double e = std::exp(-length / tau_ns);
    return length / t2 * e / (1.0 - e);
  };
  return sum_cx / t2 - total * boundary(geo.width) + total * boundary(geo.span);
}

LifetimeFit fit_lifetime(std::span<const double> bin_centers,
                         std::span<const double> counts, double start_ns) {
  if (bin_centers.size() != counts.size())
    throw DomainError("fit_lifetime: centers and counts sizes differ");
  if (bin_centers.size() < 3)
    throw FitError("fit_lifetime: need at least 3 bins");
  double max_count = 0.0;
  std::size_t peak = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!(counts[j] >= 0.0))
      throw DomainError("fit_lifetime: counts must be >= 0");
    if (counts[j] > max_count) {
      max_count = counts[j];
      peak = j;
    }
  }
  if (!(max_count > 0.0))
    throw FitError("fit_lifetime: no positive counts");

  std::size_t start = peak;
  if (start_ns >= 0.0) {
    start = 0;
    while (start < bin_centers.size() && bin_centers[start] < start_ns) ++start;
  }
  if (start + 2 >= bin_centers.size())
    throw FitError("fit_lifetime: tail has too few bins");

  const auto geo = tail_geometry(bin_centers, start);
  // moment start value: mean residual time of the tail
  double s = 0.0, c = 0.0;
  for (std::size_t j = start; j < counts.size(); ++j) {
    s += counts[j] * (bin_centers[j] - bin_centers[start]);
    c += counts[j];
  }
  if (!(c > 0.0)) throw FitError("fit_lifetime: tail is empty");
  const double tau0 = std::max(s / c, 0.25 * geo.width);

  auto neg_ll = [&](double log_tau) {
    return -lifetime_loglike(bin_centers, counts, start, std::exp(log_tau));
  };
  const double log_tau =
      golden_min(neg_ll, std::log(tau0 / 30.0), std::log(tau0 * 30.0), 140);

  LifetimeFit fit;
  fit.tau_ns = std::exp(log_tau);
  fit.start_bin = start;
  fit.log_likelihood = lifetime_loglike(bin_centers, counts, start, fit.tau_ns);
  const double h = fit.tau_ns * 1e-4;
  const double d2 =
      (lifetime_loglike(bin_centers, counts, start, fit.tau_ns + h) -
       2.0 * fit.log_likelihood +
       lifetime_loglike(bin_centers, counts, start, fit.tau_ns - h)) /
      (h * h);
  fit.tau_err_ns = d2 < 0.0 ? 1.0 / std::sqrt(-d2)
                            : std::numeric_limits<double>::infinity();
  return fit;
}

// --- Lorentzian ---

double lorentzian_model(double x, const double p[4]) {
  const double u = x - p[1];
  const double h = 0.5 * p[2];
  return p[0] * h * h / (u * u + h * h) + p[3];
}

void lorentzian_gradient(double x, const double p[4], double grad[4]) {
  const double u = x - p[1];
  const double h = 0.5 * p[2];
  const double denom = u * u + h * h;
  grad[0] = h * h / denom;
  grad[1] = p[0] * h * h * 2.0 * u / (denom * denom);
  // d/d fwhm = d/dh * 1/2; d model/dh = 2 A h u^2 / denom^2
  grad[2] = p[0] * h * u * u / (denom * denom);
  grad[3] = 1.0;
}

LorentzianFit fit_lorentzian(std::span<const double> wavelength_nm,
                             std::span<const double> intensity) {
  if (wavelength_nm.size() != intensity.size())
    throw DomainError("fit_lorentzian: wavelength and intensity sizes differ");
  const std::size_t n = wavelength_nm.size();
  if (n < 5) throw FitError("fit_lorentzian: need at least 5 samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(wavelength_nm[i] > wavelength_nm[i - 1]))
      throw DomainError("fit_lorentzian: wavelengths must be strictly increasing");

  double y_min = intensity[0], y_max = intensity[0];
  std::size_t peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (intensity[i] > y_max) {
      y_max = intensity[i];
      peak = i;
    }
    y_min = std::min(y_min, intensity[i]);
  }
  if (!(y_max > y_min))
    throw FitError("fit_lorentzian: flat spectrum, no line to fit");

  // initial FWHM from the half-max crossings around the peak
  const double half = y_min + 0.5 * (y_max - y_min);
  double left = wavelength_nm.front(), right = wavelength_nm.back();
  for (std::size_t i = peak; i-- > 0;)
    if (intensity[i] < half) { left = wavelength_nm[i]; break; }
  for (std::size_t i = peak + 1; i < n; ++i)
    if (intensity[i] < half) { right = wavelength_nm[i]; break; }
  double fwhm0 = right - left;
  if (!(fwhm0 > 0.0))
    fwhm0 = (wavelength_nm.back() - wavelength_nm.front()) / 4.0;

  double p[4] = {y_max - y_min, wavelength_nm[peak], fwhm0, y_min};

  auto chi2_of = [&](const double q[4]) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = intensity[i] - lorentzian_model(wavelength_nm[i], q);
      s += r * r;
    }
    return s;
  };

  double lambda = 1e-3;
  double chi2 = chi2_of(p);
  int iters = 0;
  bool converged = false;
  for (; iters < 200; ++iters) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      double g[4];
      lorentzian_gradient(wavelength_nm[i], p, g);
      const Eigen::Vector4d gv(g[0], g[1], g[2], g[3]);
      const double r = intensity[i] - lorentzian_model(wavelength_nm[i], p);
      jtj += gv * gv.transpose();
      jtr += gv * r;
    }
    Eigen::Matrix4d damped = jtj;
    for (int k = 0; k < 4; ++k)
      damped(k, k) += lambda * std::max(jtj(k, k), 1e-30);
    const Eigen::Vector4d step = damped.ldlt().solve(jtr);
    if (!step.allFinite())
      throw FitError("fit_lorentzian: singular step (degenerate spectrum)");
    double trial[4];
    for (int k = 0; k < 4; ++k) trial[k] = p[k] + step(k);
    if (trial[2] <= 0.0) trial[2] = 0.5 * p[2];
    const double trial_chi2 = chi2_of(trial);
    if (trial_chi2 <= chi2) {
      const double rel_step = step.cwiseAbs().maxCoeff() /
                              std::max(1.0, std::abs(p[1]));
      const double rel_drop = (chi2 - trial_chi2) / std::max(chi2, 1e-300);
      std::copy(trial, trial + 4, p);
      chi2 = trial_chi2;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel_step < 1e-12 || rel_drop < 1e-14) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  if (!converged && iters >= 200)
    throw FitError("fit_lorentzian: no convergence after 200 iterations");
  if (!(p[2] > 0.0))
    throw FitError("fit_lorentzian: non-positive width at optimum");

  LorentzianFit fit;
  fit.amplitude = p[0];
  fit.center_nm = p[1];
  fit.fwhm_nm = p[2];
  fit.offset = p[3];
  fit.iterations = iters;
  const double dof = static_cast<double>(n) - 4.0;
  fit.chi2_dof = dof > 0.0 ? chi2 / dof : 0.0;

  Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    double g[4];
    lorentzian_gradient(wavelength_nm[i], p, g);
    const Eigen::Vector4d gv(g[0], g[1], g[2], g[3]);
    jtj += gv * gv.transpose();
  }
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  Eigen::FullPivLU<Eigen::Matrix4d> lu(jtj);
  if (lu.isInvertible()) cov = lu.inverse() * fit.chi2_dof;
  fit.center_err_nm = std::sqrt(std::max(cov(1, 1), 0.0));
  fit.fwhm_err_nm = std::sqrt(std::max(cov(2, 2), 0.0));

  fit.q = fit.center_nm / fit.fwhm_nm;
  const double dql = 1.0 / fit.fwhm_nm;
  const double dqf = -fit.center_nm / (fit.fwhm_nm * fit.fwhm_nm);
  const double var_q = dql * dql * cov(1, 1) + dqf * dqf * cov(2, 2) +
                       2.0 * dql * dqf * cov(1, 2);
  fit.q_err = std::sqrt(std::max(var_q, 0.0));
  return fit;
}

LorentzianFit fit_lorentzian(const std::vector<SpectrumSample>& spectrum) {
  std::vector<double> wl, in;
  wl.reserve(spectrum.size());
  in.reserve(spectrum.size());
  for (const auto& s : spectrum) {
    wl.push_back(s.wavelength_nm);
    in.push_back(s.intensity);
  }
  return fit_lorentzian(wl, in);
}

}  // namespace qdpost
