// End-to-end checks of the installed command-line binary: exit codes,
// output files, determinism across reruns and thread counts.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("qdpost_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& stdout_to = {}) {
  std::string cmd = std::string(QDPOST_CLI) + " " + args;
  if (!stdout_to.empty()) cmd += " > " + stdout_to.string();
  cmd += " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kConfigJson = R"({
  "seed": 5,
  "excitation": {"n_pulses": 20000, "pump_power_uw": 3.0, "p_sat_uw": 3.0},
  "background": {"amplitude": 0.0495},
  "channel": {"beta": 1.0, "eta_extract": 1.0, "lens": 1.0,
              "polarizer_linear": 1.0, "polarizer_unpol": 1.0,
              "detector": 0.5},
  "detector": {"jitter_sigma_ns": 0.142},
  "analysis": {"detection_efficiency": 0.5}
})";

fs::path write_config(const fs::path& dir) {
  const fs::path p = dir / "config.json";
  std::ofstream out(p);
  out << kConfigJson;
  return p;
}

}  // namespace

TEST_CASE("simulate then analyze then report") {
  const auto dir = temp_dir("happy");
  const auto cfg = write_config(dir);

  CHECK(run("simulate --config " + cfg.string() + " --out " +
            (dir / "sim").string()) == 0);
  CHECK(fs::exists(dir / "sim" / "stream.csv"));
  CHECK(fs::exists(dir / "sim" / "records.csv"));
  CHECK(fs::exists(dir / "sim" / "summary.json"));
  CHECK(fs::exists(dir / "sim" / "manifest.json"));

  CHECK(run("analyze --config " + cfg.string() + " --input " +
            (dir / "sim" / "records.csv").string() + " --out " +
            (dir / "ana").string()) == 0);
  CHECK(fs::exists(dir / "ana" / "report.json"));
  CHECK(fs::exists(dir / "ana" / "fit_curve.csv"));

  const fs::path rendered = dir / "report.txt";
  CHECK(run("report --input " + (dir / "ana" / "report.json").string(),
            rendered) == 0);
  const std::string text = slurp(rendered);
  CHECK(text.find("g2(0)") != std::string::npos);
  CHECK(text.find("count rate") != std::string::npos);
}

TEST_CASE("pipeline and optics subcommands") {
  const auto dir = temp_dir("pipe");
  const auto cfg = write_config(dir);
  CHECK(run("pipeline --config " + cfg.string() +
            " --powers 0.8,1.6,3,6 --out " + (dir / "p").string()) == 0);
  CHECK(fs::exists(dir / "p" / "pipeline.csv"));
  CHECK(fs::exists(dir / "p" / "report.json"));

  CHECK(run("optics --config " + cfg.string() + " --out " +
            (dir / "o").string()) == 0);
  const std::string report = slurp(dir / "o" / "report.json");
  CHECK(report.find("mode_waist") != std::string::npos);
}

TEST_CASE("reruns are byte-identical, independent of --threads") {
  const auto dir = temp_dir("determinism");
  const auto cfg = write_config(dir);
  CHECK(run("simulate --config " + cfg.string() + " --seed 99 --out " +
            (dir / "a").string()) == 0);
  CHECK(run("simulate --config " + cfg.string() + " --seed 99 --threads 4 --out " +
            (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "stream.csv") == slurp(dir / "b" / "stream.csv"));
  CHECK(slurp(dir / "a" / "records.csv") == slurp(dir / "b" / "records.csv"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));

  // a different seed changes the data
  CHECK(run("simulate --config " + cfg.string() + " --seed 100 --out " +
            (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "stream.csv") != slurp(dir / "c" / "stream.csv"));
}

TEST_CASE("exit codes distinguish failure classes") {
  const auto dir = temp_dir("errors");
  const auto cfg = write_config(dir);

  // config error: malformed config file
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"emitter": {"tau_on_ns": -1}})";
  }
  CHECK(run("simulate --config " + (dir / "bad.json").string() + " --out " +
            (dir / "x").string()) == 2);

  // io error: unparseable analysis input
  {
    std::ofstream out(dir / "junk.csv");
    out << "colA,colB\n1,2\n";
  }
  CHECK(run("analyze --config " + cfg.string() + " --input " +
            (dir / "junk.csv").string() + " --out " + (dir / "x").string()) ==
        3);

  // fit error: an all-zero histogram cannot be fitted
  {
    std::ofstream out(dir / "zeros.csv");
    out << "bin_center_ns,counts\n";
    for (int i = 0; i < 120; ++i)
      out << (-30.0 + 0.5 * (i + 0.5)) << ",0\n";
  }
  CHECK(run("analyze --config " + cfg.string() + " --input " +
            (dir / "zeros.csv").string() + " --out " + (dir / "x").string()) ==
        4);

  // usage error: unknown subcommand
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("defaults are used when no config is given") {
  const auto dir = temp_dir("defaults");
  CHECK(run("simulate --pulses 2000 --out " + (dir / "d").string()) == 0);
  CHECK(fs::exists(dir / "d" / "config.json"));
  const std::string cfg = slurp(dir / "d" / "config.json");
  CHECK(cfg.find("\"q_post\": 628.0") != std::string::npos);
}
