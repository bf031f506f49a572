#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pmflow/field_io.hpp"
#include "pmflow/scenario.hpp"

using namespace pmflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("pmflow_scn_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal config gets defaults filled") {
  ScenarioConfig cfg = parse_config("[initial]\npreset = barenblatt\n");
  CHECK(cfg.initial.preset == "barenblatt");
  CHECK(cfg.grid.cells[0] == 256);   // default
  CHECK(cfg.solver.dt > 0.0);
}

TEST_CASE("gamma below one is rejected with the right message") {
  CHECK_THROWS_WITH_AS(parse_config("[pressure]\ngamma = 0.5\n"),
                       doctest::Contains("gamma >= 1"), std::invalid_argument);
}

TEST_CASE("unknown keys name the offender and the nearest valid key") {
  try {
    parse_config("[solver]\ndt = 0.01\ncfll = 0.5\n");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("cfll") != std::string::npos);
    CHECK(msg.find("cfl") != std::string::npos);
  }
}

TEST_CASE("all violations are reported, not just the first") {
  try {
    parse_config("[pressure]\ngamma = 0.5\n[solver]\ndt = -1\n[time]\nsample_dt = 0\n");
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("gamma") != std::string::npos);
    CHECK(msg.find("dt must be positive") != std::string::npos);
    CHECK(msg.find("sample_dt") != std::string::npos);
  }
}

TEST_CASE("config round trip for every preset") {
  for (const std::string& name : scenario_preset_names()) {
    ScenarioConfig cfg = scenario_preset(name);
    ScenarioConfig again = parse_config(render_config(cfg));
    CHECK(config_equal(cfg, again));
  }
}

TEST_CASE("ID4 declaration rejects non-binary initial data") {
  ScenarioConfig cfg = scenario_preset("two-blob-segregation");  // smooth bumps
  cfg.id.id4 = true;
  cfg.grid.cells = {64};
  cfg.solver.dt = 0.02;
  cfg.time.horizon = 0.0;
  auto dir = temp_dir("id4");
  ScenarioRunSummary sum = run_scenario(cfg, dir);
  bool found = false;
  for (const auto& c : sum.checks) {
    if (c.name == "id4-binary-density") {
      found = true;
      CHECK_FALSE(c.pass);
    }
  }
  CHECK(found);
  CHECK_FALSE(sum.all_passed());
  fs::remove_all(dir);
}

TEST_CASE("mini barenblatt run: checks pass, files exist, check/report work") {
  ScenarioConfig cfg = scenario_preset("barenblatt");
  cfg.grid.cells = {128};
  cfg.solver.dt = 0.02;
  cfg.time.horizon = 0.25;
  cfg.time.sample_dt = 0.125;
  auto dir = temp_dir("mini");
  ScenarioRunSummary sum = run_scenario(cfg, dir);
  for (const auto& c : sum.checks) {
    INFO(c.name, " value=", c.value, " thr=", c.threshold);
    if (c.hard) CHECK(c.pass);
  }
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "diagnostics.csv"));
  CHECK(fs::exists(dir / "config.ini"));
  CHECK(fs::exists(dir / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(dir / "trajectories.csv"));

  std::vector<CheckResult> rechecked;
  CHECK(check_run_dir(dir, &rechecked));
  CHECK(rechecked.size() > sum.checks.size());  // recomputed entries added

  std::string report = emit_report(dir);
  CHECK(report.find("Invariant checks") != std::string::npos);
  CHECK(report.find("mass") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("duplicate runs are bit-identical") {
  ScenarioConfig cfg = scenario_preset("barenblatt");
  cfg.grid.cells = {128};
  cfg.solver.dt = 0.02;
  cfg.time.horizon = 0.25;
  auto dir_a = temp_dir("det_a");
  auto dir_b = temp_dir("det_b");
  run_scenario(cfg, dir_a);
  run_scenario(cfg, dir_b);

  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is),
                       std::istreambuf_iterator<char>());
  };
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), dir_a);
    INFO("file ", rel.string());
    REQUIRE(fs::exists(dir_b / rel));
    CHECK(slurp(entry.path()) == slurp(dir_b / rel));
    ++compared;
  }
  CHECK(compared > 5);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("custom-from-file initial data round trips through snapshots") {
  auto dir = temp_dir("custom");
  GridSpec g = GridSpec::make1d(-4.0, 4.0, 64);
  ScalarField rho(g, 0.0, "rho_0");
  for (int i = 24; i < 40; ++i) rho.at(i, 0) = 0.5;
  write_field(dir / "rho0", rho);
  ScalarField n0(g, 0.25, "n");
  write_field(dir / "n0", n0);

  ScenarioConfig cfg;
  cfg.scenario.name = "custom";
  cfg.grid = {1, {-4.0}, {4.0}, {64}, "truncated"};
  cfg.pressure = {false, 2.0};
  cfg.growth.preset = "constant";
  cfg.growth.rates = {0.0};
  cfg.initial.preset = "custom-from-file";
  cfg.initial.rho_files = {(dir / "rho0").string()};
  cfg.initial.n_file = (dir / "n0").string();
  cfg.solver.dt = 0.02;
  cfg.time.horizon = 0.1;
  cfg.flows.enabled = false;
  ScenarioRunSummary sum = run_scenario(cfg, dir / "run");
  CHECK(sum.all_passed());
  fs::remove_all(dir);
}

TEST_CASE("incompressible preset runs and respects its invariants") {
  ScenarioConfig cfg = scenario_preset("two-blob-incompressible");
  cfg.grid.cells = {128};
  cfg.solver.dt = 0.02;
  cfg.time.horizon = 0.2;
  cfg.flows.enabled = false;
  auto dir = temp_dir("hs");
  ScenarioRunSummary sum = run_scenario(cfg, dir);
  for (const auto& c : sum.checks) {
    INFO(c.name, " value=", c.value, " thr=", c.threshold);
    if (c.hard) CHECK(c.pass);
  }
  fs::remove_all(dir);
}

TEST_CASE("report on a two-resolution pair includes convergence ratios") {
  ScenarioConfig cfg = scenario_preset("barenblatt");
  cfg.solver.dt = 0.04;
  cfg.time.horizon = 0.25;
  cfg.flows.enabled = true;
  auto parent = temp_dir("pair");
  cfg.grid.cells = {128};
  run_scenario(cfg, parent / "n128");
  cfg.grid.cells = {256};
  cfg.solver.dt = 0.02;
  run_scenario(cfg, parent / "n256");
  std::string report = emit_report(parent);
  CHECK(report.find("Convergence ratios") != std::string::npos);
  fs::remove_all(parent);
}

TEST_CASE("empty run dir is an error") {
  auto dir = temp_dir("empty");
  CHECK_THROWS(emit_report(dir));
  CHECK_THROWS(check_run_dir(dir, nullptr));
  fs::remove_all(dir);
}
