// qdpost command-line front end. Thin shell over the C API: parse arguments,
// load/override the config, call the matching qdp_run_* entry point, map the
// status to an exit code.

#include <qdpost/qdpost.h>

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace {

struct ConfigHandle {
  qdp_config* cfg = nullptr;
  ~ConfigHandle() { qdp_config_free(cfg); }
};

int exit_code_for(qdp_status status) {
  switch (status) {
    case QDP_OK:
      return 0;
    case QDP_ERR_DOMAIN:
    case QDP_ERR_CONFIG:
      return 2;
    case QDP_ERR_IO:
      return 3;
    case QDP_ERR_FIT:
      return 4;
    default:
      return 1;
  }
}

int finish(qdp_status status) {
  if (status != QDP_OK)
    std::fprintf(stderr, "qdpost: error: %s\n", qdp_last_error());
  return exit_code_for(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-photon source simulator and analysis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
  app.add_option("--config", config_path, "experiment config (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (results identical)");

  auto* sim = app.add_subcommand("simulate", "generate a photon stream and detection records");
  std::uint64_t pulses = 0;
  double power = -1.0;
  sim->add_option("--pulses", pulses, "override the number of pulses");
  sim->add_option("--power", power, "override the pump power (uW)");

  auto* ana = app.add_subcommand("analyze", "fit a correlation histogram and derive g2/efficiency");
  std::string input_path;
  ana->add_option("--input", input_path, "records CSV or histogram CSV")
      ->required()
      ->check(CLI::ExistingFile);

  auto* pipe = app.add_subcommand("pipeline", "efficiency vs power with saturation fit and cavity metrics");
  std::vector<double> powers;
  pipe->add_option("--powers", powers, "pump powers in uW (default from config)")
      ->delimiter(',');

  auto* opt = app.add_subcommand("optics", "mode waist, divergence, collection, far field");
  std::string near_field;
  opt->add_option("--near-field", near_field, "near-field grid (CSV or binary)")
      ->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "render a report JSON as text");
  std::string report_path;
  rep->add_option("--input", report_path, "report.json to render")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (rep->parsed()) {
    char* text = nullptr;
    const qdp_status status = qdp_report_render(report_path.c_str(), &text);
    if (status == QDP_OK) {
      std::fputs(text, stdout);
      qdp_string_free(text);
    }
    return finish(status);
  }

  ConfigHandle handle;
  qdp_status status = config_path.empty()
                          ? qdp_config_default(&handle.cfg)
                          : qdp_config_load(config_path.c_str(), &handle.cfg);
  if (status != QDP_OK) return finish(status);
  if (seed_set) {
    status = qdp_config_set_seed(handle.cfg, seed);
    if (status != QDP_OK) return finish(status);
  }
  if (sim->parsed()) {
    if (pulses > 0) {
      status = qdp_config_set_n_pulses(handle.cfg, pulses);
      if (status != QDP_OK) return finish(status);
    }
    if (power >= 0.0) {
      status = qdp_config_set_pump_power(handle.cfg, power);
      if (status != QDP_OK) return finish(status);
    }
    status = qdp_run_simulate(handle.cfg, out_dir.c_str(), threads);
    if (status == QDP_OK)
      std::printf("simulate: wrote stream.csv, records.csv, summary.json to %s\n",
                  out_dir.c_str());
    return finish(status);
  }
  if (ana->parsed()) {
    status = qdp_run_analyze(handle.cfg, input_path.c_str(), out_dir.c_str());
    if (status == QDP_OK)
      std::printf("analyze: wrote report.json, fit_curve.csv to %s\n",
                  out_dir.c_str());
    return finish(status);
  }
  if (pipe->parsed()) {
    status = qdp_run_pipeline(handle.cfg, powers.empty() ? nullptr : powers.data(),
                              powers.size(), out_dir.c_str(), threads);
    if (status == QDP_OK)
      std::printf("pipeline: wrote pipeline.csv, report.json to %s\n",
                  out_dir.c_str());
    return finish(status);
  }
  if (opt->parsed()) {
    status = qdp_run_optics(handle.cfg,
                            near_field.empty() ? nullptr : near_field.c_str(),
                            out_dir.c_str());
    if (status == QDP_OK)
      std::printf("optics: wrote report.json to %s\n", out_dir.c_str());
    return finish(status);
  }
  return 2;
}
