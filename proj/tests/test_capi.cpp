// Exercises the shared-library C API: handles, status codes, thread-local
// error messages, and the command entry points the CLI uses.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <qdpost/qdpost.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("qdpost_capi_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Cfg {
  qdp_config* h = nullptr;
  ~Cfg() { qdp_config_free(h); }
};

// bright, fast configuration for end-to-end runs
const char* kBrightJson = R"({
  "seed": 11,
  "excitation": {"n_pulses": 30000, "pump_power_uw": 3.0, "p_sat_uw": 3.0},
  "background": {"amplitude": 0.0495},
  "channel": {"beta": 1.0, "eta_extract": 1.0, "lens": 1.0,
              "polarizer_linear": 1.0, "polarizer_unpol": 1.0,
              "detector": 0.5},
  "detector": {"jitter_sigma_ns": 0.142}
})";

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::string(qdp_version()) == "0.1.0");
  double out = 0.0;
  CHECK(qdp_excitation_probability(3.0, 3.0, &out) == QDP_OK);
  CHECK(std::string(qdp_last_error()).empty());
}

TEST_CASE("null pointers and domain errors map to status codes") {
  CHECK(qdp_excitation_probability(3.0, 3.0, nullptr) == QDP_ERR_NULL);
  CHECK(std::string(qdp_last_error()).find("null pointer") !=
        std::string::npos);

  double out = 0.0;
  CHECK(qdp_excitation_probability(3.0, -1.0, &out) == QDP_ERR_DOMAIN);
  CHECK(std::string(qdp_last_error()).find("p_sat") != std::string::npos);

  CHECK(qdp_single_photon_efficiency(0.4, 1.5, &out) == QDP_ERR_DOMAIN);
  qdp_config* cfg = nullptr;
  CHECK(qdp_config_parse("{invalid", &cfg) == QDP_ERR_CONFIG);
  CHECK(qdp_config_load("/nonexistent/path.json", &cfg) == QDP_ERR_IO);
}

TEST_CASE("scalar operations match their reference values") {
  double v = 0.0;
  CHECK(qdp_excitation_probability(3.0, 3.0, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.6321205588285577).epsilon(1e-12));

  CHECK(qdp_background_mean(6.0, 0.05, 2.0, 3.0, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

  double lin = 0, unp = 0, ens = 0;
  CHECK(qdp_polarizer_transmission(0.331, &lin, &unp, &ens) == QDP_OK);
  CHECK(ens == doctest::Approx(0.6655));

  CHECK(qdp_peak_template(0.0, 4.4, 0.0, &v) == QDP_OK);
  CHECK(v == doctest::Approx(1.0 / 8.8).epsilon(1e-12));

  CHECK(qdp_multiphoton_bound(0.406, 0.14, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.01153852).epsilon(1e-9));

  CHECK(qdp_single_photon_efficiency(0.406, 0.14, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.37650891091712557).epsilon(1e-9));

  CHECK(qdp_purcell_factor(25.4, 4.4, &v) == QDP_OK);
  CHECK(v == doctest::Approx(5.772727272727272).epsilon(1e-12));
  CHECK(qdp_coupling_beta(5.772727272727272, 0.0, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.8267716535433071).epsilon(1e-12));
  CHECK(qdp_extraction_efficiency(628.0, 1718.0, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.36554132712456344).epsilon(1e-12));
  CHECK(qdp_expected_total_efficiency(0.8267716535433071,
                                      0.36554132712456344, &v) == QDP_OK);
  CHECK(v == doctest::Approx(0.30221920746519026).epsilon(1e-12));

  double waist = 0, vnum = 0;
  CHECK(qdp_mode_waist_estimate(0.3, 3.5, 1.0, 0.855, &waist, &vnum) ==
        QDP_OK);
  CHECK(waist == doctest::Approx(0.21915995821558104).epsilon(1e-12));
  double theta = 0;
  CHECK(qdp_beam_divergence(2.72, 0.855, 1.0, &theta) == QDP_OK);
  CHECK(theta == doctest::Approx(0.10005696789968418).epsilon(1e-12));
  double frac = 0;
  CHECK(qdp_lens_collection_fraction(0.1, 0.1, &frac) == QDP_OK);
  CHECK(frac == doctest::Approx(0.8646647167633873).epsilon(1e-12));
  double lens = 0;
  CHECK(qdp_lens_half_angle_for_fraction(1.2417, 0.22, &lens) == QDP_OK);
  CHECK(qdp_lens_collection_fraction(1.2417, lens, &frac) == QDP_OK);
  CHECK(frac == doctest::Approx(0.22).epsilon(1e-9));
}

TEST_CASE("cavity metrics struct") {
  qdp_cavity_metrics m{};
  CHECK(qdp_cavity_metrics_eval(25.4, 4.4, 0.0, 628.0, 1718.0, 1.4, 1.2,
                                69.0, 13.0, &m) == QDP_OK);
  CHECK(m.purcell == doctest::Approx(5.7727272727).epsilon(1e-9));
  CHECK(m.beta == doctest::Approx(0.8267716535).epsilon(1e-9));
  CHECK(m.eta_extract == doctest::Approx(0.3655413271).epsilon(1e-9));
  CHECK(m.eta_expected == doctest::Approx(0.3022192075).epsilon(1e-9));
  CHECK(m.eta_extract_err == doctest::Approx(0.0402).epsilon(0.02));
}

TEST_CASE("config handle lifecycle") {
  Cfg cfg;
  REQUIRE(qdp_config_default(&cfg.h) == QDP_OK);
  CHECK(qdp_config_set_seed(cfg.h, 424242) == QDP_OK);
  uint64_t seed = 0;
  CHECK(qdp_config_get_seed(cfg.h, &seed) == QDP_OK);
  CHECK(seed == 424242);
  CHECK(qdp_config_set_n_pulses(cfg.h, 0) == QDP_ERR_CONFIG);
  char hash[17];
  CHECK(qdp_config_hash(cfg.h, hash, sizeof hash) == QDP_OK);
  CHECK(std::strlen(hash) == 16);
  char tiny[4];
  CHECK(qdp_config_hash(cfg.h, tiny, sizeof tiny) == QDP_ERR_DOMAIN);

  const auto dir = temp_dir("cfg");
  const std::string path = (dir / "cfg.json").string();
  CHECK(qdp_config_save(cfg.h, path.c_str()) == QDP_OK);
  Cfg back;
  CHECK(qdp_config_load(path.c_str(), &back.h) == QDP_OK);
  uint64_t seed2 = 0;
  CHECK(qdp_config_get_seed(back.h, &seed2) == QDP_OK);
  CHECK(seed2 == 424242);
}

TEST_CASE("simulation chain through handles") {
  Cfg cfg;
  REQUIRE(qdp_config_parse(kBrightJson, &cfg.h) == QDP_OK);

  qdp_stream* stream = nullptr;
  REQUIRE(qdp_simulate_stream(cfg.h, &stream) == QDP_OK);
  uint64_t n_events = 0;
  CHECK(qdp_stream_size(stream, &n_events) == QDP_OK);
  CHECK(n_events > 15000);

  uint64_t pulse = 0;
  double t = -1.0;
  int32_t origin = -1, pol = -1;
  CHECK(qdp_stream_event(stream, 0, &pulse, &t, &origin, &pol) == QDP_OK);
  CHECK(t >= 0.0);
  CHECK((origin == 0 || origin == 1));
  CHECK(qdp_stream_event(stream, n_events, &pulse, &t, &origin, &pol) ==
        QDP_ERR_DOMAIN);

  qdp_records* records = nullptr;
  REQUIRE(qdp_detect(cfg.h, stream, &records) == QDP_OK);
  uint64_t n1 = 0, n2 = 0;
  CHECK(qdp_records_counts(records, &n1, &n2) == QDP_OK);
  CHECK(n1 + n2 > 0);
  double rate = 0.0;
  CHECK(qdp_count_rate(records, 30000.0 * 13.0, &rate) == QDP_OK);
  CHECK(rate > 0.0);

  qdp_histogram* hist = nullptr;
  REQUIRE(qdp_build_histogram(records, 0.25, 104.0, 0, &hist) == QDP_OK);
  uint64_t n_bins = 0;
  CHECK(qdp_histogram_n_bins(hist, &n_bins) == QDP_OK);
  CHECK(n_bins == 832);
  CHECK(qdp_build_histogram(records, -1.0, 104.0, 0, &hist) ==
        QDP_ERR_DOMAIN);
  CHECK(qdp_build_histogram(records, 0.25, 104.0, 7, &hist) ==
        QDP_ERR_DOMAIN);

  qdp_peak_fit fit{};
  REQUIRE(qdp_fit_peak_areas(hist, 4.4, 0.2008646057681165, 13.0, &fit) ==
          QDP_OK);
  CHECK(fit.area_side > 0.0);
  CHECK(fit.g2_zero > 0.02);
  CHECK(fit.g2_zero < 0.35);

  // round trip the records through CSV
  const auto dir = temp_dir("records");
  const std::string path = (dir / "records.csv").string();
  CHECK(qdp_records_write_csv(records, path.c_str()) == QDP_OK);
  qdp_records* back = nullptr;
  CHECK(qdp_records_read_csv(path.c_str(), &back) == QDP_OK);
  uint64_t b1 = 0, b2 = 0;
  CHECK(qdp_records_counts(back, &b1, &b2) == QDP_OK);
  CHECK(b1 == n1);
  CHECK(b2 == n2);

  const std::string hist_path = (dir / "hist.csv").string();
  CHECK(qdp_histogram_write_csv(hist, hist_path.c_str()) == QDP_OK);
  qdp_histogram* hist_back = nullptr;
  CHECK(qdp_histogram_read_csv(hist_path.c_str(), &hist_back) == QDP_OK);
  uint64_t nb = 0;
  CHECK(qdp_histogram_n_bins(hist_back, &nb) == QDP_OK);
  CHECK(nb == n_bins);

  qdp_histogram_free(hist_back);
  qdp_histogram_free(hist);
  qdp_records_free(back);
  qdp_records_free(records);
  qdp_stream_free(stream);
}

TEST_CASE("fits through the C API") {
  // saturation
  std::vector<double> p, eta;
  for (int i = 0; i < 10; ++i) {
    p.push_back(0.3 * std::pow(20.0 / 0.3, i / 9.0));
    eta.push_back(0.376 * (1.0 - std::exp(-p.back() / 3.0)));
  }
  qdp_saturation_fit sat{};
  REQUIRE(qdp_fit_saturation(p.data(), eta.data(), p.size(), &sat) == QDP_OK);
  CHECK(sat.eta_max == doctest::Approx(0.376).epsilon(1e-6));
  CHECK(sat.p_sat_uw == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(sat.p_sat_identifiable == 1);

  // lifetime
  std::vector<double> centers, counts;
  for (int j = 0; j < 300; ++j) {
    centers.push_back(0.1 + 0.2 * j);
    const double a = 0.2 * j;
    counts.push_back(1e6 * (std::exp(-a / 4.4) - std::exp(-(a + 0.2) / 4.4)));
  }
  qdp_lifetime_fit lt{};
  REQUIRE(qdp_fit_lifetime(centers.data(), counts.data(), centers.size(),
                           -1.0, &lt) == QDP_OK);
  CHECK(lt.tau_ns == doctest::Approx(4.4).epsilon(1e-6));

  // lorentzian
  std::vector<double> wl, in;
  const double fwhm = 855.0 / 628.0;
  for (int i = 0; i < 300; ++i) {
    const double x = 851.0 + 8.0 * i / 299.0;
    const double u = x - 855.0, h = fwhm / 2.0;
    wl.push_back(x);
    in.push_back(900.0 * h * h / (u * u + h * h) + 20.0);
  }
  qdp_lorentzian_fit lor{};
  REQUIRE(qdp_fit_lorentzian(wl.data(), in.data(), wl.size(), &lor) == QDP_OK);
  CHECK(lor.q == doctest::Approx(628.0).epsilon(1e-6));

  // degenerate inputs surface as fit errors
  qdp_saturation_fit bad{};
  CHECK(qdp_fit_saturation(p.data(), eta.data(), 2, &bad) == QDP_ERR_FIT);
}

TEST_CASE("command entry points") {
  Cfg cfg;
  REQUIRE(qdp_config_parse(kBrightJson, &cfg.h) == QDP_OK);
  const auto dir = temp_dir("cmd");

  REQUIRE(qdp_run_simulate(cfg.h, (dir / "sim").string().c_str(), 2) ==
          QDP_OK);
  CHECK(fs::exists(dir / "sim" / "stream.csv"));
  CHECK(fs::exists(dir / "sim" / "records.csv"));
  CHECK(fs::exists(dir / "sim" / "manifest.json"));

  REQUIRE(qdp_run_analyze(cfg.h, (dir / "sim" / "records.csv").string().c_str(),
                          (dir / "ana").string().c_str()) == QDP_OK);
  CHECK(fs::exists(dir / "ana" / "report.json"));

  char* text = nullptr;
  REQUIRE(qdp_report_render((dir / "ana" / "report.json").string().c_str(),
                            &text) == QDP_OK);
  REQUIRE(text != nullptr);
  CHECK(std::string(text).find("g2(0)") != std::string::npos);
  qdp_string_free(text);

  const double powers[] = {1.0, 3.0, 9.0};
  REQUIRE(qdp_run_pipeline(cfg.h, powers, 3, (dir / "pipe").string().c_str(),
                           2) == QDP_OK);
  CHECK(fs::exists(dir / "pipe" / "pipeline.csv"));

  REQUIRE(qdp_run_optics(cfg.h, nullptr, (dir / "opt").string().c_str()) ==
          QDP_OK);
  CHECK(fs::exists(dir / "opt" / "report.json"));
}
