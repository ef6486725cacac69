#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace qdpost {

struct GaussianBeam {
  double waist_w0_um = 1.0;   // 1/e field radius (1/e^2 in intensity)
  double wavelength_um = 0.855;
  double medium_index = 1.0;

  void validate() const;
};

struct ModeWaistResult {
  double waist_um = 0.0;
  double v_number = 0.0;
  bool below_single_mode_validity = false;  // V < 0.8
};

/// Gaussian-mode waist of the fundamental mode of a step-index cylinder
/// (Marcuse approximation): w0 = a (0.65 + 1.619 V^-3/2 + 2.879 V^-6).
ModeWaistResult mode_waist_estimate(double core_radius_um, double n_core,
                                    double n_clad, double wavelength_um);

struct DivergenceResult {
  double half_angle_rad = 0.0;   // 1/e^2 far-field half-angle, paraxial
  bool paraxial_warning = false; // theta > 0.5 rad
};

DivergenceResult beam_divergence(const GaussianBeam& beam);

struct CollectionResult {
  double fraction = 0.0;
  bool paraxial_warning = false;
};

/// Fraction of a Gaussian far field inside a lens cone:
/// 1 - exp(-2 theta_lens^2 / theta^2).
CollectionResult lens_collection_fraction(double divergence_rad,
                                          double lens_half_angle_rad);

/// Lens half-angle that would collect the target fraction (calibration of an
/// unknown aperture against a known collection estimate).
double lens_half_angle_for_fraction(double divergence_rad,
                                    double target_fraction);

/// Sampled complex near field; amplitudes row-major, index = iy * nx + ix.
struct FieldGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx_um = 0.0;
  double dy_um = 0.0;
  std::vector<std::complex<double>> amplitudes;

  void validate() const;
  double power() const;  // sum |E|^2 dx dy
};

/// Zero-padded discrete angular spectrum, fftshifted so spatial frequencies
/// ascend along each axis. amplitudes include the dx dy measure so that
/// sum |amp|^2 dfx dfy equals the near-field power (Parseval).
struct AngularSpectrum {
  std::size_t nfx = 0;
  std::size_t nfy = 0;
  std::vector<double> fx_per_um;
  std::vector<double> fy_per_um;
  std::vector<std::complex<double>> amplitudes;  // row-major, iy * nfx + ix
  double dfx = 0.0;
  double dfy = 0.0;
};

AngularSpectrum angular_spectrum(const FieldGrid& grid, int pad_factor = 4);

struct FarFieldPattern {
  std::size_t nkx = 0;
  std::size_t nky = 0;
  std::vector<double> kx_over_k;
  std::vector<double> ky_over_k;
  std::vector<double> intensity;  // zero outside the propagating circle
  double near_field_power = 0.0;
  double spectrum_power = 0.0;     // before evanescent truncation
  double propagating_power = 0.0;
};

/// Far-field intensity over direction cosines from the Fourier transform of
/// the near field; evanescent components (kx^2 + ky^2 > k^2) are excluded.
/// Requires dx, dy < lambda / 2 so the propagating circle is fully sampled.
FarFieldPattern far_field_transform(const FieldGrid& grid,
                                    double wavelength_um, int pad_factor = 4);

/// 1/e^2 intensity half-angle of a far field from its second moments
/// (exact for a Gaussian pattern); used to compare FFT results with the
/// paraxial divergence formula.
double far_field_e2_half_angle(const FarFieldPattern& pattern);

}  // namespace qdpost
