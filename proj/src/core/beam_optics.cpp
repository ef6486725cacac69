#include "core/beam_optics.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace qdpost {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void GaussianBeam::validate() const {
  if (!(waist_w0_um > 0.0)) throw DomainError("beam.waist_w0 must be > 0");
  if (!(wavelength_um > 0.0)) throw DomainError("beam.wavelength must be > 0");
  if (!(medium_index >= 1.0)) throw DomainError("beam.medium_index must be >= 1");
}

ModeWaistResult mode_waist_estimate(double core_radius_um, double n_core,
                                    double n_clad, double wavelength_um) {
  if (!(core_radius_um > 0.0))
    throw DomainError("mode_waist: core radius must be > 0");
  if (!(wavelength_um > 0.0))
    throw DomainError("mode_waist: wavelength must be > 0");
  if (!(n_clad >= 1.0) || !(n_core > n_clad))
    throw DomainError("mode_waist: require n_core > n_clad >= 1");
  const double v = 2.0 * std::numbers::pi * core_radius_um *
                   std::sqrt(n_core * n_core - n_clad * n_clad) /
                   wavelength_um;
  const double w0 = core_radius_um * (0.65 + 1.619 * std::pow(v, -1.5) +
                                      2.879 * std::pow(v, -6.0));
  return {w0, v, v < 0.8};
}

DivergenceResult beam_divergence(const GaussianBeam& beam) {
  beam.validate();
  const double theta = beam.wavelength_um /
                       (std::numbers::pi * beam.waist_w0_um * beam.medium_index);
  return {theta, theta > 0.5};
}

CollectionResult lens_collection_fraction(double divergence_rad,
                                          double lens_half_angle_rad) {
  const double half_pi = 0.5 * std::numbers::pi;
  if (!(divergence_rad > 0.0 && divergence_rad < half_pi))
    throw DomainError("lens_collection: divergence must be in (0, pi/2)");
  if (!(lens_half_angle_rad > 0.0 && lens_half_angle_rad < half_pi))
    throw DomainError("lens_collection: lens half-angle must be in (0, pi/2)");
  const double r = lens_half_angle_rad / divergence_rad;
  return {-std::expm1(-2.0 * r * r),
          divergence_rad > 0.5 || lens_half_angle_rad > 0.5};
}

double lens_half_angle_for_fraction(double divergence_rad,
                                    double target_fraction) {
  if (!(divergence_rad > 0.0))
    throw DomainError("lens calibration: divergence must be > 0");
  if (!(target_fraction > 0.0 && target_fraction < 1.0))
    throw DomainError("lens calibration: target fraction must be in (0, 1)");
  return divergence_rad * std::sqrt(-0.5 * std::log1p(-target_fraction));
}

void FieldGrid::validate() const {
  if (nx < 2 || ny < 2) throw DomainError("field grid: nx, ny must be >= 2");
  if (!(dx_um > 0.0) || !(dy_um > 0.0))
    throw DomainError("field grid: dx, dy must be > 0");
  if (amplitudes.size() != nx * ny)
    throw DomainError("field grid: amplitude count does not match nx * ny");
  const double p = power();
  if (!(p > 0.0) || !std::isfinite(p))
    throw DomainError("field grid: total power must be finite and > 0");
}

double FieldGrid::power() const {
  double s = 0.0;
  for (const auto& a : amplitudes) s += std::norm(a);
  return s * dx_um * dy_um;
}

AngularSpectrum angular_spectrum(const FieldGrid& grid, int pad_factor) {
  grid.validate();
  if (pad_factor < 1)
    throw DomainError("angular_spectrum: pad factor must be >= 1");
  const std::size_t nfx = next_pow2(grid.nx * static_cast<std::size_t>(pad_factor));
  const std::size_t nfy = next_pow2(grid.ny * static_cast<std::size_t>(pad_factor));

  std::vector<std::complex<double>> in(nfx * nfy, {0.0, 0.0});
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix)
      in[iy * nfx + ix] = grid.amplitudes[iy * grid.nx + ix];

  std::vector<std::complex<double>> out(nfx * nfy);
  fftw_plan plan = fftw_plan_dft_2d(
      static_cast<int>(nfy), static_cast<int>(nfx),
      reinterpret_cast<fftw_complex*>(in.data()),
      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  AngularSpectrum sp;
  sp.nfx = nfx;
  sp.nfy = nfy;
  sp.dfx = 1.0 / (static_cast<double>(nfx) * grid.dx_um);
  sp.dfy = 1.0 / (static_cast<double>(nfy) * grid.dy_um);
  sp.fx_per_um.resize(nfx);
  sp.fy_per_um.resize(nfy);
  for (std::size_t i = 0; i < nfx; ++i)
    sp.fx_per_um[i] =
        (static_cast<double>(i) - static_cast<double>(nfx / 2)) * sp.dfx;
  for (std::size_t i = 0; i < nfy; ++i)
    sp.fy_per_um[i] =
        (static_cast<double>(i) - static_cast<double>(nfy / 2)) * sp.dfy;

  // fftshift and apply the dx dy measure
  const double measure = grid.dx_um * grid.dy_um;
  sp.amplitudes.resize(nfx * nfy);
  for (std::size_t iy = 0; iy < nfy; ++iy) {
    const std::size_t sy = (iy + nfy - nfy / 2) % nfy;
    for (std::size_t ix = 0; ix < nfx; ++ix) {
      const std::size_t sx = (ix + nfx - nfx / 2) % nfx;
      sp.amplitudes[iy * nfx + ix] = out[sy * nfx + sx] * measure;
    }
  }
  return sp;
}

FarFieldPattern far_field_transform(const FieldGrid& grid,
                                    double wavelength_um, int pad_factor) {
  if (!(wavelength_um > 0.0))
    throw DomainError("far_field: wavelength must be > 0");
  grid.validate();
  if (!(grid.dx_um < wavelength_um / 2.0) ||
      !(grid.dy_um < wavelength_um / 2.0))
    throw DomainError(
        "far_field: undersampled grid; require dx, dy < lambda / 2");

  const AngularSpectrum sp = angular_spectrum(grid, pad_factor);

  FarFieldPattern ff;
  ff.nkx = sp.nfx;
  ff.nky = sp.nfy;
  ff.kx_over_k.resize(sp.nfx);
  ff.ky_over_k.resize(sp.nfy);
  for (std::size_t i = 0; i < sp.nfx; ++i)
    ff.kx_over_k[i] = wavelength_um * sp.fx_per_um[i];
  for (std::size_t i = 0; i < sp.nfy; ++i)
    ff.ky_over_k[i] = wavelength_um * sp.fy_per_um[i];

  ff.near_field_power = grid.power();
  ff.intensity.assign(sp.nfx * sp.nfy, 0.0);
  const double cell = sp.dfx * sp.dfy;
  for (std::size_t iy = 0; iy < sp.nfy; ++iy) {
    for (std::size_t ix = 0; ix < sp.nfx; ++ix) {
      const double i2 = std::norm(sp.amplitudes[iy * sp.nfx + ix]);
      ff.spectrum_power += i2 * cell;
      const double sx = ff.kx_over_k[ix];
      const double sy = ff.ky_over_k[iy];
      if (sx * sx + sy * sy <= 1.0) {
        ff.intensity[iy * sp.nfx + ix] = i2;
        ff.propagating_power += i2 * cell;
      }
    }
  }
  return ff;
}

double far_field_e2_half_angle(const FarFieldPattern& pattern) {
  double total = 0.0, sx2 = 0.0, sy2 = 0.0;
  for (std::size_t iy = 0; iy < pattern.nky; ++iy) {
    for (std::size_t ix = 0; ix < pattern.nkx; ++ix) {
      const double v = pattern.intensity[iy * pattern.nkx + ix];
      total += v;
      sx2 += v * pattern.kx_over_k[ix] * pattern.kx_over_k[ix];
      sy2 += v * pattern.ky_over_k[iy] * pattern.ky_over_k[iy];
    }
  }
  if (!(total > 0.0)) throw DomainError("far_field: empty pattern");
  // Gaussian e^(-2 s^2/s0^2) has <sx^2> = <sy^2> = s0^2 / 4
  return std::sqrt(2.0 * (sx2 + sy2) / total);
}

}  // namespace qdpost
