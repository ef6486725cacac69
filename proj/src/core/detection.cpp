#include "core/detection.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace qdpost {

namespace {

constexpr std::uint64_t kSaltDecisions = 0x11;
constexpr std::uint64_t kSaltJitter = 0x12;
constexpr std::uint64_t kSaltDark = 0x13;

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw DomainError(std::string("channel.") + name + " must be in [0, 1]");
}

void dead_time_filter(std::vector<double>& times, double dead_time_ns) {
  if (times.empty()) return;
  std::size_t kept = 0;
  double last = times[0];
  times[kept++] = times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] - last >= dead_time_ns) {
      last = times[i];
      times[kept++] = times[i];
    }
  }
  times.resize(kept);
}

}  // namespace

void ChannelEfficiencies::validate() const {
  check_unit(beta, "beta");
  check_unit(eta_extract, "eta_extract");
  check_unit(lens, "lens");
  check_unit(polarizer_linear, "polarizer_linear");
  check_unit(polarizer_unpol, "polarizer_unpol");
  check_unit(detector, "detector");
}

void DetectorSpec::validate() const {
  if (!(jitter_sigma_ns >= 0.0))
    throw DomainError("detector.jitter_sigma_ns must be >= 0");
  if (!(dead_time_ns >= 0.0))
    throw DomainError("detector.dead_time_ns must be >= 0");
  if (!(dark_rate_hz >= 0.0))
    throw DomainError("detector.dark_rate_hz must be >= 0");
}

PolarizerTransmissions polarizer_transmission(double polarized_fraction) {
  if (!(polarized_fraction >= 0.0 && polarized_fraction <= 1.0))
    throw DomainError("polarizer_transmission: fraction must be in [0, 1]");
  return {1.0, 0.5, 0.5 * (1.0 + polarized_fraction)};
}

double channel_transmission(const ChannelEfficiencies& eff, Polarization pol) {
  eff.validate();
  const double pol_t = pol == Polarization::Linear ? eff.polarizer_linear
                                                   : eff.polarizer_unpol;
  return eff.beta * eff.eta_extract * eff.lens * pol_t * eff.detector;
}

DetectionRecords detect(const EmissionStream& stream,
                        const ChannelEfficiencies& eff,
                        const DetectorSpec& spec, const RandomStream& rng) {
  eff.validate();
  spec.validate();
  const double t_linear = channel_transmission(eff, Polarization::Linear);
  const double t_unpol = channel_transmission(eff, Polarization::Unpolarized);

  RandomStream decisions = rng.substream(kSaltDecisions);
  RandomStream jitter = rng.substream(kSaltJitter);
  RandomStream dark = rng.substream(kSaltDark);

  DetectionRecords rec;
  rec.duration_ns = stream.duration_ns();
  rec.total_pulses = stream.excitation.n_pulses;

  for (const auto& ev : stream.events) {
    const double p =
        ev.polarization == Polarization::Linear ? t_linear : t_unpol;
    if (decisions.uniform() >= p) continue;
    auto& dst = decisions.uniform() < 0.5 ? rec.d1_ns : rec.d2_ns;
    double t = stream.abs_time_ns(ev);
    if (spec.jitter_sigma_ns > 0.0) t = jitter.normal(t, spec.jitter_sigma_ns);
    dst.push_back(t);
  }

  if (spec.dark_rate_hz > 0.0 && rec.duration_ns > 0.0) {
    const double mean = spec.dark_rate_hz * rec.duration_ns * 1e-9;
    for (auto* dst : {&rec.d1_ns, &rec.d2_ns}) {
      const std::uint64_t k = dark.poisson(mean);
      for (std::uint64_t i = 0; i < k; ++i)
        dst->push_back(dark.uniform() * rec.duration_ns);
    }
  }

  for (auto* dst : {&rec.d1_ns, &rec.d2_ns}) {
    std::sort(dst->begin(), dst->end());
    if (spec.dead_time_ns > 0.0) dead_time_filter(*dst, spec.dead_time_ns);
  }
  return rec;
}

CorrelationHistogram build_histogram(const DetectionRecords& records,
                                     double bin_width_ns, double window_ns,
                                     HistogramMode mode) {
  if (!(bin_width_ns > 0.0))
    throw DomainError("build_histogram: bin_width must be > 0");
  if (!(window_ns > 0.0))
    throw DomainError("build_histogram: window must be > 0");

  CorrelationHistogram hist;
  hist.bin_width_ns = bin_width_ns;
  hist.window_ns = window_ns;
  hist.mode = mode;
  hist.total_pulses = records.total_pulses;
  hist.duration_ns = records.duration_ns;
  hist.n_d1 = records.d1_ns.size();
  hist.n_d2 = records.d2_ns.size();
  const std::size_t n_bins =
      static_cast<std::size_t>(std::ceil(2.0 * window_ns / bin_width_ns));
  hist.counts.assign(n_bins, 0);

  auto bin_of = [&](double dt) {
    auto idx = static_cast<std::ptrdiff_t>(
        std::floor((dt + window_ns) / bin_width_ns));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<std::ptrdiff_t>(n_bins))
      idx = static_cast<std::ptrdiff_t>(n_bins) - 1;
    return static_cast<std::size_t>(idx);
  };

  const auto& d1 = records.d1_ns;
  const auto& d2 = records.d2_ns;

  if (mode == HistogramMode::AllPairs) {
    std::size_t lo = 0;
    for (const double t1 : d1) {
      while (lo < d2.size() && d2[lo] < t1 - window_ns) ++lo;
      for (std::size_t j = lo; j < d2.size() && d2[j] <= t1 + window_ns; ++j)
        ++hist.counts[bin_of(d2[j] - t1)];
    }
  } else {
    std::size_t lo = 0;
    for (const double t1 : d1) {
      while (lo < d2.size() && d2[lo] <= t1) ++lo;
      if (lo < d2.size() && d2[lo] - t1 <= window_ns)
        ++hist.counts[bin_of(d2[lo] - t1)];
    }
  }
  return hist;
}

CorrelationHistogram merge_histograms(const CorrelationHistogram& a,
                                      const CorrelationHistogram& b) {
  if (a.bin_width_ns != b.bin_width_ns || a.window_ns != b.window_ns ||
      a.mode != b.mode || a.counts.size() != b.counts.size())
    throw DomainError("merge_histograms: incompatible binning or mode");
  CorrelationHistogram out = a;
  for (std::size_t i = 0; i < out.counts.size(); ++i)
    out.counts[i] += b.counts[i];
  out.total_pulses += b.total_pulses;
  out.duration_ns += b.duration_ns;
  out.n_d1 += b.n_d1;
  out.n_d2 += b.n_d2;
  return out;
}

double count_rate_per_s(const DetectionRecords& records, double duration_ns) {
  if (!(duration_ns > 0.0))
    throw DomainError("count_rate: duration must be > 0");
  return static_cast<double>(records.total()) / duration_ns * 1e9;
}

}  // namespace qdpost
