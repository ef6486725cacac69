#pragma once

#include <cstdint>
#include <vector>

#include "core/source_model.hpp"

namespace qdpost {

/// Per-stage survival probabilities of the optical chain. The polarizer has
/// separate transmissions for the linearly polarized and unpolarized parts
/// of the light; folding a measured combined efficiency into `detector` and
/// setting both polarizer fields to 1 is equally valid.
struct ChannelEfficiencies {
  double beta = 1.0;
  double eta_extract = 1.0;
  double lens = 1.0;
  double polarizer_linear = 1.0;
  double polarizer_unpol = 1.0;
  double detector = 1.0;

  void validate() const;
  bool operator==(const ChannelEfficiencies&) const = default;
};

struct DetectorSpec {
  double jitter_sigma_ns = 0.0;  // Gaussian timing jitter per detector
  double dead_time_ns = 0.0;
  double dark_rate_hz = 0.0;     // uniform dark counts per detector

  void validate() const;
  bool operator==(const DetectorSpec&) const = default;
};

enum class Detector : std::uint8_t { D1, D2 };

/// Timestamps that survived the channel, split by detector and sorted.
struct DetectionRecords {
  std::vector<double> d1_ns;
  std::vector<double> d2_ns;
  double duration_ns = 0.0;
  std::uint64_t total_pulses = 0;

  std::size_t total() const { return d1_ns.size() + d2_ns.size(); }
};

struct PolarizerTransmissions {
  double linear;    // applied to the Linear-tagged fraction
  double unpol;     // applied to the unpolarized fraction
  double ensemble;  // transmission of the mixed line, (1 + rho) / 2
};

/// Polarizer aligned with the linear component of a line whose polarized
/// fraction is rho.
PolarizerTransmissions polarizer_transmission(double polarized_fraction);

/// End-to-end survival probability of one photon of the given polarization.
double channel_transmission(const ChannelEfficiencies& eff, Polarization pol);

/// Push a stream through the channel and HBT beamsplitter: independent
/// survival, 50/50 routing, Gaussian jitter, per-detector dead-time filter.
/// Pure in the stream value and the rng key (survival/routing, jitter, and
/// dark counts use separate derived substreams, so e.g. switching jitter off
/// does not change which photons survive).
DetectionRecords detect(const EmissionStream& stream,
                        const ChannelEfficiencies& eff,
                        const DetectorSpec& spec, const RandomStream& rng);

enum class HistogramMode : std::uint8_t { AllPairs, StartStop };

struct CorrelationHistogram {
  double bin_width_ns = 0.0;
  double window_ns = 0.0;  // half-range; bins cover [-window, +window]
  HistogramMode mode = HistogramMode::AllPairs;
  std::vector<std::uint64_t> counts;
  std::uint64_t total_pulses = 0;
  double duration_ns = 0.0;
  std::uint64_t n_d1 = 0;
  std::uint64_t n_d2 = 0;

  std::size_t n_bins() const { return counts.size(); }
  double bin_center(std::size_t i) const {
    return -window_ns + (static_cast<double>(i) + 0.5) * bin_width_ns;
  }
};

/// Histogram of inter-detection delays t2 - t1 for (D1, D2) pairs.
/// AllPairs counts every pair with |t2 - t1| <= window; StartStop counts,
/// for each D1 record, only the next D2 record after it (if within the
/// window), which reproduces the classic start-stop measurement and its
/// low-efficiency approximation of the correlation function.
CorrelationHistogram build_histogram(const DetectionRecords& records,
                                     double bin_width_ns, double window_ns,
                                     HistogramMode mode);

/// Bin-wise sum of two shards of the same acquisition (identical binning
/// and mode required).
CorrelationHistogram merge_histograms(const CorrelationHistogram& a,
                                      const CorrelationHistogram& b);

/// Total detection rate across both detectors in s^-1.
double count_rate_per_s(const DetectionRecords& records, double duration_ns);

}  // namespace qdpost
