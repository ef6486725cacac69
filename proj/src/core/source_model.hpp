#pragma once

#include <cstdint>
#include <vector>

#include "core/random.hpp"

namespace qdpost {

/// Emitter rates and polarization. tau_on is the cavity-enhanced radiative
/// lifetime 1/gamma, tau_off the unmodified lifetime 1/gamma_0,
/// gamma_c_ratio the fraction gamma_c/gamma_0 coupled into the mode at zero
/// storage time, polarized_fraction the linearly polarized share of the
/// emission line.
struct EmitterParams {
  double tau_on_ns = 4.4;
  double tau_off_ns = 25.4;
  double gamma_c_ratio = 0.0;
  double polarized_fraction = 0.331;

  void validate() const;
  bool operator==(const EmitterParams&) const = default;
};

struct ExcitationConfig {
  double rep_period_ns = 13.0;
  double pump_power_uw = 3.0;
  double p_sat_uw = 3.0;
  std::uint64_t n_pulses = 1;
  std::uint64_t rng_seed = 1;

  void validate() const;
  bool operator==(const ExcitationConfig&) const = default;
};

/// Poissonian background of unregulated photons. Mean photons per pulse is
/// amplitude * (P / P_sat)^power_exponent; arrival offsets are exponential
/// with time constant tau_bg_ns.
struct BackgroundParams {
  double amplitude = 0.0;
  double power_exponent = 2.0;
  double tau_bg_ns = 4.4;

  void validate() const;
  bool operator==(const BackgroundParams&) const = default;
};

enum class Origin : std::uint8_t { QDLine, Background };
enum class Polarization : std::uint8_t { Linear, Unpolarized };

struct EmissionEvent {
  std::uint64_t pulse_index;
  double time_offset_ns;  // relative to the pulse arrival
  Origin origin;
  Polarization polarization;
};

/// Photon emissions over a pulse train, sorted by absolute time.
struct EmissionStream {
  EmitterParams emitter;
  ExcitationConfig excitation;
  BackgroundParams background;
  std::vector<EmissionEvent> events;

  double abs_time_ns(const EmissionEvent& e) const {
    return static_cast<double>(e.pulse_index) * excitation.rep_period_ns +
           e.time_offset_ns;
  }
  double duration_ns() const {
    return static_cast<double>(excitation.n_pulses) * excitation.rep_period_ns;
  }
};

/// Probability that a pump pulse of power P excites the dot: 1 - e^(-P/P_sat).
double excitation_probability(double pump_power_uw, double p_sat_uw);

/// Mean background photons per pulse at pump power P.
double background_mean(double pump_power_uw, const BackgroundParams& bg,
                       double p_sat_uw);

/// Draw one pulse: at most one regulated line photon (exponential offset,
/// mean tau_on, Linear with probability polarized_fraction) plus
/// Poisson-distributed unpolarized background photons. Appends to `out`.
void sample_pulse(RandomStream& rng, std::uint64_t pulse_index,
                  const EmitterParams& emitter, const ExcitationConfig& exc,
                  const BackgroundParams& bg, std::vector<EmissionEvent>& out);

/// Generate the full pulse train. Deterministic for a given rng_seed and
/// independent of n_threads: every pulse draws from its own derived
/// substream, so any partition of the pulse range merges to the same stream.
EmissionStream generate_stream(const EmitterParams& emitter,
                               const ExcitationConfig& exc,
                               const BackgroundParams& bg,
                               unsigned n_threads = 1);

}  // namespace qdpost
