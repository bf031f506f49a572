#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pmflow/grid.hpp"

namespace pmflow {

// Whole-scenario configuration, one section per module. Parsed from a small
// INI-style document ('#' comments, [section], key = value).
struct ScenarioConfig {
  struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
  } scenario;

  struct Grid {
    int dim = 1;
    std::vector<double> min{-8.0};
    std::vector<double> max{8.0};
    std::vector<int> cells{256};
    std::string boundary = "truncated";
  } grid;

  struct Pressure {
    bool infinite = false;
    double gamma = 2.0;
  } pressure;

  struct Growth {
    std::string preset = "constant";  // linear-homeostatic|nutrient-gated|constant|expressions
    int species = 1;
    double g0 = 0.0;
    double delta = 0.0;
    double p_h = 1.0;
    std::vector<double> rates{0.0};
    std::vector<std::string> expressions;
  } growth;

  struct Nutrient {
    bool enabled = false;
    double alpha = 1.0;
    std::vector<double> beta{0.0};
    std::string initial = "zero";  // zero|uniform|gaussian
    double n0_amplitude = 1.0;
    double n0_sigma = 1.0;
  } nutrient;

  struct Initial {
    std::string preset = "barenblatt";  // barenblatt|two-blob-segregation|
                                        // tumor-nutrient-disk|custom-from-file
    double t0 = 0.0;
    double barenblatt_c = 0.75;
    double blob_center = 1.0;
    double blob_halfwidth = 0.5;
    double blob_amplitude = 0.8;
    double disk_radius = 1.0;
    int mollify_k = 0;  // 0 disables mollification
    std::vector<std::string> rho_files;
    std::string n_file;
  } initial;

  struct Id {
    bool id1 = false, id2 = false, id3 = false, id4 = false, id5 = false;
    double lambda = 0.5;
  } id;

  struct Solver {
    double dt = 0.01;
    double cfl = 0.5;
    double tol_fp = 1e-7;
    int max_fp = 2000;
    double eps_min = 1e-8;
    double tol_lin = 1e-11;
    int max_lin = 4000;
    double resync = 0.5;
  } solver;

  struct Obstacle {
    double tol = 1e-9;
    int max_sweeps = 50000;
    double omega = 1.8;
  } obstacle;

  struct Time {
    double horizon = 1.0;
    double sample_dt = 0.25;
  } time;

  struct Flows {
    bool enabled = false;
    double cfl = 0.5;
    int history_stride = 1;
  } flows;

  struct Probe {
    bool enabled = false;
    std::vector<double> epsilons{0.1, 0.01, 0.001};
    double w_amplitude = 1.0;
    double horizon_T = 0.25;
  } probe;

  struct Diagnostics {
    bool enabled = true;
    double lambda_prime = 0.5;
    std::string regime = "basic";  // basic|log-weighted
    double p_floor = 1e-30;
  } diagnostics;

  struct Output {
    std::string dir = "out";
    bool snapshots = true;
    bool snapshot_csv = false;
  } output;
};

// Parses and validates; reports every violation, not just the first.
// Unknown keys name the offender and the nearest valid key.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& file);
// Canonical rendering; parse(render(cfg)) == cfg for all presets.
std::string render_config(const ScenarioConfig& cfg);
bool config_equal(const ScenarioConfig& a, const ScenarioConfig& b);

// Built-in full-scenario presets:
//   barenblatt, two-blob-segregation, two-blob-incompressible,
//   segregation-counterexample, tumor-nutrient-disk, gamma-sweep-base
ScenarioConfig scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

struct CheckResult {
  std::string name;
  bool pass = true;
  bool hard = true;  // hard checks gate the exit code; soft ones are reported
  double value = 0.0;
  double threshold = 0.0;
  std::string note;
};

struct ScenarioRunSummary {
  std::string scenario_name;
  std::string config_fingerprint;
  std::vector<CheckResult> checks;
  std::map<std::string, double> constants;  // fitted/measured values
  std::vector<std::string> files;
  bool all_passed() const;
};

// Executes solver + flows + diagnostics and writes the run directory:
// rendered config, snapshots, diagnostics.csv + manifest, trajectories,
// final checkpoint, summary.json. Deterministic byte-for-byte per config.
ScenarioRunSummary run_scenario(const ScenarioConfig& cfg,
                                const std::filesystem::path& outdir);

// gamma-sweep driver (CLI `sweep-gamma`): CSV table + JSON metadata.
ScenarioRunSummary run_gamma_sweep(const ScenarioConfig& cfg,
                                   const std::vector<double>& gammas,
                                   const std::filesystem::path& outdir);

// Re-validates a finished run directory from its files; returns pass.
bool check_run_dir(const std::filesystem::path& run_dir,
                   std::vector<CheckResult>* results = nullptr);

// Human-readable markdown summary; adds a convergence-ratio section when the
// directory holds two runs of the same scenario at different resolutions.
std::string emit_report(const std::filesystem::path& run_dir);

}  // namespace pmflow
