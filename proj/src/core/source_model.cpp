#include "core/source_model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "core/errors.hpp"

namespace qdpost {

namespace {

// Substream salts; one branch per consumer of the run seed.
constexpr std::uint64_t kSaltEmission = 0x01;

struct PulseSampler {
  double p_exc;
  double polarized_fraction;
  double tau_on;
  double mu_bg;
  double tau_bg;

  void operator()(RandomStream& rng, std::uint64_t pulse_index,
                  std::vector<EmissionEvent>& out) const {
    if (rng.uniform() < p_exc) {
      const bool linear = rng.uniform() < polarized_fraction;
      out.push_back({pulse_index, rng.exponential(tau_on), Origin::QDLine,
                     linear ? Polarization::Linear : Polarization::Unpolarized});
    }
    const std::uint64_t k = rng.poisson(mu_bg);
    for (std::uint64_t i = 0; i < k; ++i) {
      out.push_back({pulse_index, rng.exponential(tau_bg), Origin::Background,
                     Polarization::Unpolarized});
    }
  }
};

PulseSampler make_sampler(const EmitterParams& emitter,
                          const ExcitationConfig& exc,
                          const BackgroundParams& bg) {
  return PulseSampler{excitation_probability(exc.pump_power_uw, exc.p_sat_uw),
                      emitter.polarized_fraction, emitter.tau_on_ns,
                      background_mean(exc.pump_power_uw, bg, exc.p_sat_uw),
                      bg.tau_bg_ns};
}

}  // namespace

void EmitterParams::validate() const {
  if (!(tau_on_ns > 0.0)) throw DomainError("emitter.tau_on_ns must be > 0");
  if (!(tau_off_ns > 0.0)) throw DomainError("emitter.tau_off_ns must be > 0");
  if (!(gamma_c_ratio >= 0.0 && gamma_c_ratio <= 1.0))
    throw DomainError("emitter.gamma_c_ratio must be in [0, 1]");
  if (!(polarized_fraction >= 0.0 && polarized_fraction <= 1.0))
    throw DomainError("emitter.polarized_fraction must be in [0, 1]");
}

void ExcitationConfig::validate() const {
  if (!(rep_period_ns > 0.0))
    throw DomainError("excitation.rep_period_ns must be > 0");
  if (!(pump_power_uw >= 0.0))
    throw DomainError("excitation.pump_power_uw must be >= 0");
  if (!(p_sat_uw > 0.0)) throw DomainError("excitation.p_sat_uw must be > 0");
  if (n_pulses < 1) throw DomainError("excitation.n_pulses must be >= 1");
}

void BackgroundParams::validate() const {
  if (!(amplitude >= 0.0))
    throw DomainError("background.amplitude must be >= 0");
  if (!(power_exponent >= 0.0))
    throw DomainError("background.power_exponent must be >= 0");
  if (!(tau_bg_ns > 0.0)) throw DomainError("background.tau_bg_ns must be > 0");
}

double excitation_probability(double pump_power_uw, double p_sat_uw) {
  if (!(p_sat_uw > 0.0))
    throw DomainError("excitation_probability: p_sat must be > 0");
  if (!(pump_power_uw >= 0.0))
    throw DomainError("excitation_probability: pump power must be >= 0");
  return -std::expm1(-pump_power_uw / p_sat_uw);
}

double background_mean(double pump_power_uw, const BackgroundParams& bg,
                       double p_sat_uw) {
  if (!(pump_power_uw >= 0.0))
    throw DomainError("background_mean: pump power must be >= 0");
  if (!(p_sat_uw > 0.0)) throw DomainError("background_mean: p_sat must be > 0");
  bg.validate();
  if (bg.amplitude == 0.0) return 0.0;
  return bg.amplitude * std::pow(pump_power_uw / p_sat_uw, bg.power_exponent);
}

void sample_pulse(RandomStream& rng, std::uint64_t pulse_index,
                  const EmitterParams& emitter, const ExcitationConfig& exc,
                  const BackgroundParams& bg, std::vector<EmissionEvent>& out) {
  emitter.validate();
  make_sampler(emitter, exc, bg)(rng, pulse_index, out);
}

EmissionStream generate_stream(const EmitterParams& emitter,
                               const ExcitationConfig& exc,
                               const BackgroundParams& bg,
                               unsigned n_threads) {
  emitter.validate();
  exc.validate();
  bg.validate();
  const double span_ns =
      static_cast<double>(exc.n_pulses) * exc.rep_period_ns;
  if (!(span_ns < 1e15))
    throw DomainError(
        "generate_stream: absolute time range exceeds 1e15 ns; timestamps "
        "would lose sub-ns resolution");

  const PulseSampler sampler = make_sampler(emitter, exc, bg);
  const RandomStream root = RandomStream(exc.rng_seed).substream(kSaltEmission);

  EmissionStream stream{emitter, exc, bg, {}};

  const std::uint64_t n = exc.n_pulses;
  auto run_range = [&](std::uint64_t lo, std::uint64_t hi,
                       std::vector<EmissionEvent>& out) {
    for (std::uint64_t i = lo; i < hi; ++i) {
      RandomStream rng = root.substream(i);
      sampler(rng, i, out);
    }
  };

  if (n_threads <= 1 || n < 4096) {
    run_range(0, n, stream.events);
  } else {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(n_threads, n));
    std::vector<std::vector<EmissionEvent>> parts(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t lo = static_cast<std::uint64_t>(w) * chunk;
      const std::uint64_t hi = std::min(n, lo + chunk);
      pool.emplace_back([&, lo, hi, w] { run_range(lo, hi, parts[w]); });
    }
    for (auto& t : pool) t.join();
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    stream.events.reserve(total);
    for (auto& p : parts)
      stream.events.insert(stream.events.end(), p.begin(), p.end());
  }

  std::sort(stream.events.begin(), stream.events.end(),
            [&](const EmissionEvent& a, const EmissionEvent& b) {
              const double ta = stream.abs_time_ns(a);
              const double tb = stream.abs_time_ns(b);
              if (ta != tb) return ta < tb;
              if (a.pulse_index != b.pulse_index)
                return a.pulse_index < b.pulse_index;
              return a.time_offset_ns < b.time_offset_ns;
            });

  // single-exciton regulation: never more than one line photon per pulse
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto& e : stream.events) {
    if (e.origin != Origin::QDLine) continue;
    if (seen[e.pulse_index]++)
      throw std::logic_error("generate_stream: duplicate line photon in pulse");
  }

  return stream;
}

}  // namespace qdpost
