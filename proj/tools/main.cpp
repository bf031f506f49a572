#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmflow/scenario.hpp"

namespace fs = std::filesystem;

namespace {

// PMFLOW_OUTPUT_ROOT reroots relative output directories.
fs::path resolve_outdir(const std::string& dir) {
  fs::path p(dir);
  if (p.is_absolute()) return p;
  const char* root = std::getenv("PMFLOW_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') return fs::path(root) / p;
  return p;
}

pmflow::ScenarioConfig load(const std::string& config_arg) {
  if (config_arg.rfind("preset:", 0) == 0) {
    return pmflow::scenario_preset(config_arg.substr(7));
  }
  return pmflow::load_config(config_arg);
}

void apply_overrides(pmflow::ScenarioConfig& cfg, int resolution, double dt) {
  if (resolution > 0) {
    for (auto& c : cfg.grid.cells) c = resolution;
  }
  if (dt > 0.0) cfg.solver.dt = dt;
}

void print_checks(const pmflow::ScenarioRunSummary& sum, bool quiet) {
  if (quiet) return;
  for (const auto& c : sum.checks) {
    std::cout << (c.pass ? "PASS" : (c.hard ? "FAIL" : "WARN")) << "  " << c.name
              << " (value=" << c.value << ", threshold=" << c.threshold << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmflow: multispecies porous-media / Hele-Shaw simulator with "
               "Lagrangian flow diagnostics"};
  app.require_subcommand(1);

  bool quiet = false;
  int resolution_override = 0;
  double dt_override = 0.0;
  app.add_flag("--quiet", quiet, "suppress per-check output");
  app.add_option("--resolution-override", resolution_override,
                 "replace the grid cell count on every axis");
  app.add_option("--dt-override", dt_override, "replace the solver time step");

  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "run a scenario config (file or preset:<name>)");
  run_cmd->add_option("config", run_config, "config file path or preset:<name>")->required();

  std::string sweep_config;
  std::string gamma_list = "5,10,20,40";
  auto* sweep_cmd = app.add_subcommand("sweep-gamma",
                                       "incompressible-limit sweep against the hele-shaw run");
  sweep_cmd->add_option("config", sweep_config, "config file path or preset:<name>")->required();
  sweep_cmd->add_option("--gammas", gamma_list, "comma-separated increasing gamma list");

  std::string check_dir;
  auto* check_cmd = app.add_subcommand("check", "re-validate a finished run directory");
  check_cmd->add_option("run-dir", check_dir, "run directory")->required();

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "human-readable summary of run directories");
  report_cmd->add_option("run-dir", report_dir, "run directory (or parent of several)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      pmflow::ScenarioConfig cfg = load(run_config);
      apply_overrides(cfg, resolution_override, dt_override);
      fs::path outdir = resolve_outdir(cfg.output.dir);
      pmflow::ScenarioRunSummary sum = pmflow::run_scenario(cfg, outdir);
      print_checks(sum, quiet);
      if (!quiet) std::cout << "run written to " << outdir.string() << "\n";
      return sum.all_passed() ? 0 : 1;
    }
    if (*sweep_cmd) {
      pmflow::ScenarioConfig cfg = load(sweep_config);
      apply_overrides(cfg, resolution_override, dt_override);
      std::vector<double> gammas;
      std::stringstream ss(gamma_list);
      std::string item;
      while (std::getline(ss, item, ',')) gammas.push_back(std::stod(item));
      fs::path outdir = resolve_outdir(cfg.output.dir);
      pmflow::ScenarioRunSummary sum = pmflow::run_gamma_sweep(cfg, gammas, outdir);
      print_checks(sum, quiet);
      if (!quiet) std::cout << "sweep written to " << outdir.string() << "\n";
      return sum.all_passed() ? 0 : 1;
    }
    if (*check_cmd) {
      std::vector<pmflow::CheckResult> results;
      bool ok = pmflow::check_run_dir(check_dir, &results);
      if (!quiet) {
        for (const auto& c : results) {
          std::cout << (c.pass ? "PASS" : (c.hard ? "FAIL" : "WARN")) << "  " << c.name
                    << " (value=" << c.value << ")\n";
        }
      }
      return ok ? 0 : 1;
    }
    if (*report_cmd) {
      std::string text = pmflow::emit_report(report_dir);
      std::ofstream os(fs::path(report_dir) / "report.md");
      os << text;
      if (!quiet) std::cout << text;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
