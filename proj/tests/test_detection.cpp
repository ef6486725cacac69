#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "core/detection.hpp"
#include "core/errors.hpp"

using namespace qdpost;

namespace {

EmissionStream bright_stream(std::uint64_t n_pulses, std::uint64_t seed,
                             double mu_bg = 0.0) {
  EmitterParams em;
  ExcitationConfig exc{13.0, 3000.0, 3.0, n_pulses, seed};
  BackgroundParams bg{mu_bg, 0.0, 4.4};
  return generate_stream(em, exc, bg);
}

}  // namespace

TEST_CASE("polarizer transmission") {
  CHECK(polarizer_transmission(1.0).ensemble == doctest::Approx(1.0));
  CHECK(polarizer_transmission(0.0).ensemble == doctest::Approx(0.5));
  CHECK(polarizer_transmission(0.331).ensemble ==
        doctest::Approx(0.6655).epsilon(1e-12));
  const auto t = polarizer_transmission(0.42);
  CHECK(t.linear == 1.0);
  CHECK(t.unpol == 0.5);
  CHECK_THROWS_AS(polarizer_transmission(1.2), DomainError);
}

TEST_CASE("channel transmission") {
  ChannelEfficiencies eff;
  CHECK(channel_transmission(eff, Polarization::Linear) == 1.0);

  // measured chain: beta, extraction, lens, detector (polarizer folded in)
  eff = {0.83, 0.366, 0.22, 1.0, 1.0, 0.0302};
  CHECK(channel_transmission(eff, Polarization::Linear) ==
        doctest::Approx(2.0183143200000002e-3).epsilon(1e-12));

  eff.lens = 0.0;
  CHECK(channel_transmission(eff, Polarization::Linear) == 0.0);

  eff = {1.0, 1.0, 1.0, 0.9, 0.5, 1.0};
  CHECK(channel_transmission(eff, Polarization::Linear) == doctest::Approx(0.9));
  CHECK(channel_transmission(eff, Polarization::Unpolarized) ==
        doctest::Approx(0.5));

  eff.beta = 1.2;
  CHECK_THROWS_AS(channel_transmission(eff, Polarization::Linear), DomainError);
}

TEST_CASE("detect: empty stream") {
  EmissionStream s;
  s.excitation.n_pulses = 10;
  const auto rec = detect(s, {}, {}, RandomStream(1));
  CHECK(rec.total() == 0);
  CHECK(rec.duration_ns == doctest::Approx(130.0));
}

TEST_CASE("detect: lossless chain keeps every event and splits 50/50") {
  const auto s = bright_stream(100000, 3);
  const auto rec = detect(s, {}, {}, RandomStream(17));
  REQUIRE(rec.total() == s.events.size());
  const double n = static_cast<double>(rec.total());
  const double frac = static_cast<double>(rec.d1_ns.size()) / n;
  CHECK(std::abs(frac - 0.5) < 4.0 * std::sqrt(0.25 / n));
  // per-detector records sorted
  CHECK(std::is_sorted(rec.d1_ns.begin(), rec.d1_ns.end()));
  CHECK(std::is_sorted(rec.d2_ns.begin(), rec.d2_ns.end()));
}

TEST_CASE("detect: infinite dead time leaves at most one record per detector") {
  const auto s = bright_stream(2000, 5);
  DetectorSpec spec;
  spec.dead_time_ns = std::numeric_limits<double>::infinity();
  const auto rec = detect(s, {}, spec, RandomStream(5));
  CHECK(rec.d1_ns.size() <= 1);
  CHECK(rec.d2_ns.size() <= 1);
  CHECK(rec.total() >= 1);
}

TEST_CASE("detect: dead-time filter enforces the minimum spacing") {
  const auto s = bright_stream(30000, 6, 0.5);
  DetectorSpec spec;
  spec.dead_time_ns = 25.0;  // longer than the pulse period
  const auto rec = detect(s, {}, spec, RandomStream(6));
  for (const auto* v : {&rec.d1_ns, &rec.d2_ns})
    for (std::size_t i = 1; i < v->size(); ++i)
      CHECK((*v)[i] - (*v)[i - 1] >= spec.dead_time_ns);
}

TEST_CASE("detect: jitter moves timestamps but not counts") {
  const auto s = bright_stream(20000, 9);
  DetectorSpec no_jitter;
  DetectorSpec with_jitter;
  with_jitter.jitter_sigma_ns = 0.3;
  const auto a = detect(s, {}, no_jitter, RandomStream(42));
  const auto b = detect(s, {}, with_jitter, RandomStream(42));
  // survival and routing draw from a substream independent of the jitter one
  REQUIRE(a.d1_ns.size() == b.d1_ns.size());
  REQUIRE(a.d2_ns.size() == b.d2_ns.size());
  double max_shift = 0.0;
  // same events in the same order up to the jitter-induced local reordering;
  // compare sorted sequences element-wise
  for (std::size_t i = 0; i < a.d1_ns.size(); ++i)
    max_shift = std::max(max_shift, std::abs(a.d1_ns[i] - b.d1_ns[i]));
  CHECK(max_shift > 0.0);
  CHECK(max_shift < 13.0);
}

TEST_CASE("detect: loss thinning composes multiplicatively") {
  const auto s = bright_stream(100000, 12);
  ChannelEfficiencies two_stage;   // p then q via two fields
  two_stage.lens = 0.6;
  two_stage.detector = 0.5;
  ChannelEfficiencies one_stage;   // p*q in a single field
  one_stage.detector = 0.3;
  const auto a = detect(s, two_stage, {}, RandomStream(100));
  const auto b = detect(s, one_stage, {}, RandomStream(101));
  const double n = static_cast<double>(s.events.size());
  const double pq = 0.3;
  const double sigma = std::sqrt(n * pq * (1.0 - pq));
  CHECK(std::abs(static_cast<double>(a.total()) - n * pq) < 4.0 * sigma);
  CHECK(std::abs(static_cast<double>(a.total()) -
                 static_cast<double>(b.total())) < 4.0 * sigma * 1.4142136);
}

TEST_CASE("detect: dark counts appear at the configured rate") {
  EmissionStream s;
  s.excitation.n_pulses = 1000000;  // 13 ms span, no photons
  DetectorSpec spec;
  spec.dark_rate_hz = 2.0e6;
  const auto rec = detect(s, {}, spec, RandomStream(55));
  const double expected = 2.0 * spec.dark_rate_hz * s.duration_ns() * 1e-9;
  CHECK(std::abs(static_cast<double>(rec.total()) - expected) <
        4.0 * std::sqrt(expected));
}

TEST_CASE("build_histogram: argument checks and trivial cases") {
  DetectionRecords rec;
  CHECK_THROWS_AS(build_histogram(rec, 0.0, 10.0, HistogramMode::AllPairs),
                  DomainError);
  CHECK_THROWS_AS(build_histogram(rec, 0.5, -1.0, HistogramMode::AllPairs),
                  DomainError);

  auto h = build_histogram(rec, 0.5, 10.0, HistogramMode::AllPairs);
  CHECK(h.n_bins() == 40);
  for (auto c : h.counts) CHECK(c == 0);

  rec.d1_ns = {0.0};
  rec.d2_ns = {5.0};
  h = build_histogram(rec, 1.0, 50.0, HistogramMode::AllPairs);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    total += h.counts[i];
    if (h.counts[i] > 0) {
      CHECK(h.bin_center(i) == doctest::Approx(5.0).epsilon(0.2));
    }
  }
  CHECK(total == 1);
}

TEST_CASE("build_histogram: agrees with the quadratic-scan oracle") {
  RandomStream rng(77);
  DetectionRecords rec;
  for (int i = 0; i < 400; ++i) rec.d1_ns.push_back(rng.uniform() * 500.0);
  for (int i = 0; i < 350; ++i) rec.d2_ns.push_back(rng.uniform() * 500.0);
  std::sort(rec.d1_ns.begin(), rec.d1_ns.end());
  std::sort(rec.d2_ns.begin(), rec.d2_ns.end());
  const double w = 0.7, window = 40.0;

  for (auto mode : {HistogramMode::AllPairs, HistogramMode::StartStop}) {
    const auto h = build_histogram(rec, w, window, mode);
    std::vector<std::uint64_t> oracle(h.n_bins(), 0);
    auto bin_of = [&](double dt) {
      auto idx = static_cast<std::ptrdiff_t>(std::floor((dt + window) / w));
      idx = std::max<std::ptrdiff_t>(
          0, std::min<std::ptrdiff_t>(idx, oracle.size() - 1));
      return static_cast<std::size_t>(idx);
    };
    std::uint64_t pairs = 0;
    for (double t1 : rec.d1_ns) {
      if (mode == HistogramMode::AllPairs) {
        for (double t2 : rec.d2_ns)
          if (std::abs(t2 - t1) <= window) {
            ++oracle[bin_of(t2 - t1)];
            ++pairs;
          }
      } else {
        double best = std::numeric_limits<double>::infinity();
        for (double t2 : rec.d2_ns)
          if (t2 > t1) best = std::min(best, t2);
        if (best - t1 <= window) {
          ++oracle[bin_of(best - t1)];
          ++pairs;
        }
      }
    }
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(h.counts[i] == oracle[i]);
      total += h.counts[i];
    }
    CHECK(total == pairs);
  }
}

TEST_CASE("merge_histograms: sharding D1 by blocks reproduces the serial result") {
  const auto s = bright_stream(30000, 21, 0.2);
  const auto rec = detect(s, {}, {}, RandomStream(8));
  const auto full = build_histogram(rec, 0.5, 65.0, HistogramMode::AllPairs);

  DetectionRecords lo = rec, hi = rec;
  const std::size_t half = rec.d1_ns.size() / 2;
  lo.d1_ns.assign(rec.d1_ns.begin(), rec.d1_ns.begin() + half);
  hi.d1_ns.assign(rec.d1_ns.begin() + half, rec.d1_ns.end());
  lo.total_pulses = 0;
  hi.total_pulses = rec.total_pulses;
  lo.duration_ns = 0.0;
  hi.duration_ns = rec.duration_ns;
  const auto a = build_histogram(lo, 0.5, 65.0, HistogramMode::AllPairs);
  const auto b = build_histogram(hi, 0.5, 65.0, HistogramMode::AllPairs);
  const auto merged = merge_histograms(a, b);
  REQUIRE(merged.n_bins() == full.n_bins());
  for (std::size_t i = 0; i < full.n_bins(); ++i)
    CHECK(merged.counts[i] == full.counts[i]);
  CHECK(merged.total_pulses == full.total_pulses);

  auto bad = a;
  bad.bin_width_ns = 0.25;
  CHECK_THROWS_AS(merge_histograms(bad, b), DomainError);
}

TEST_CASE("count rate") {
  DetectionRecords rec;
  CHECK(count_rate_per_s(rec, 1000.0) == 0.0);
  for (int i = 0; i < 50; ++i) rec.d1_ns.push_back(i);
  for (int i = 0; i < 26; ++i) rec.d2_ns.push_back(i);
  CHECK(count_rate_per_s(rec, 1000.0) == doctest::Approx(7.6e7));
  CHECK_THROWS_AS(count_rate_per_s(rec, 0.0), DomainError);
}

TEST_CASE("detector spec validation") {
  DetectorSpec spec;
  spec.jitter_sigma_ns = -1.0;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec = {};
  spec.dead_time_ns = -0.5;
  CHECK_THROWS_AS(spec.validate(), DomainError);
}
