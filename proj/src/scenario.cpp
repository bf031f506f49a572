#include "pmflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pmflow/determinism.hpp"
#include "pmflow/diagnostics.hpp"
#include "pmflow/field_io.hpp"
#include "pmflow/flow.hpp"
#include "pmflow/hele_shaw.hpp"
#include "pmflow/model.hpp"
#include "pmflow/operators.hpp"
#include "pmflow/solver.hpp"

namespace pmflow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config text <-> ScenarioConfig
// ---------------------------------------------------------------------------

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt_num(v[i]);
  }
  return out;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int cost = a[i - 1] == b[j - 1] ? 0 : 1;
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct RawConfig {
  // section -> key -> value
  std::map<std::string, std::map<std::string, std::string>> sections;
};

RawConfig parse_raw(const std::string& text, std::vector<std::string>& errors) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        errors.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      raw.sections[section];
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": key outside any section");
      continue;
    }
    raw.sections[section][key] = value;
  }
  return raw;
}

// registry of legal keys per section; expr_N / file_rho_N are dynamic
const std::map<std::string, std::vector<std::string>>& key_registry() {
  static const std::map<std::string, std::vector<std::string>> reg = {
      {"scenario", {"name", "seed"}},
      {"grid", {"dim", "min", "max", "cells", "boundary"}},
      {"pressure", {"gamma"}},
      {"growth", {"preset", "species", "g0", "delta", "p_h", "rates"}},
      {"nutrient", {"enabled", "alpha", "beta", "initial", "n0_amplitude", "n0_sigma"}},
      {"initial",
       {"preset", "t0", "barenblatt_c", "blob_center", "blob_halfwidth",
        "blob_amplitude", "disk_radius", "mollify_k", "n_file"}},
      {"id", {"id1", "id2", "id3", "id4", "id5", "lambda"}},
      {"solver",
       {"dt", "cfl", "tol_fp", "max_fp", "eps_min", "tol_lin", "max_lin", "resync"}},
      {"obstacle", {"tol", "max_sweeps", "omega"}},
      {"time", {"horizon", "sample_dt"}},
      {"flows", {"enabled", "cfl", "history_stride"}},
      {"probe", {"enabled", "epsilons", "w_amplitude", "horizon_T"}},
      {"diagnostics", {"enabled", "lambda_prime", "regime", "p_floor"}},
      {"output", {"dir", "snapshots", "snapshot_csv"}},
  };
  return reg;
}

bool dynamic_key_ok(const std::string& section, const std::string& key) {
  if (section == "growth" && key.rfind("expr_", 0) == 0) return true;
  if (section == "initial" && key.rfind("file_rho_", 0) == 0) return true;
  return false;
}

std::string nearest_key(const std::string& section, const std::string& key) {
  const auto& reg = key_registry();
  auto it = reg.find(section);
  int best = std::numeric_limits<int>::max();
  std::string who;
  if (it != reg.end()) {
    for (const auto& k : it->second) {
      int d = levenshtein(key, k);
      if (d < best) {
        best = d;
        who = k;
      }
    }
  }
  return who;
}

class Extractor {
 public:
  Extractor(const RawConfig& raw, std::vector<std::string>& errors)
      : raw_(raw), errors_(&errors) {}

  bool has(const std::string& sec, const std::string& key) const {
    auto s = raw_.sections.find(sec);
    if (s == raw_.sections.end()) return false;
    return s->second.count(key) > 0;
  }

  std::string str(const std::string& sec, const std::string& key,
                  const std::string& def) {
    auto s = raw_.sections.find(sec);
    if (s == raw_.sections.end()) return def;
    auto k = s->second.find(key);
    return k == s->second.end() ? def : k->second;
  }

  double num(const std::string& sec, const std::string& key, double def) {
    std::string v = str(sec, key, "");
    if (v.empty()) return def;
    try {
      std::size_t end = 0;
      double d = std::stod(v, &end);
      if (end != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (...) {
      errors_->push_back("[" + sec + "] " + key + ": not a number: '" + v + "'");
      return def;
    }
  }

  int integer(const std::string& sec, const std::string& key, int def) {
    double d = num(sec, key, static_cast<double>(def));
    return static_cast<int>(d);
  }

  bool boolean(const std::string& sec, const std::string& key, bool def) {
    std::string v = str(sec, key, "");
    if (v.empty()) return def;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    errors_->push_back("[" + sec + "] " + key + ": not a boolean: '" + v + "'");
    return def;
  }

  std::vector<double> num_list(const std::string& sec, const std::string& key,
                               std::vector<double> def) {
    std::string v = str(sec, key, "");
    if (v.empty()) return def;
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(trim(item)));
      } catch (...) {
        errors_->push_back("[" + sec + "] " + key + ": bad list entry '" + item + "'");
        return def;
      }
    }
    return out;
  }

  std::vector<int> int_list(const std::string& sec, const std::string& key,
                            std::vector<int> def) {
    std::vector<double> d = num_list(sec, key, {});
    if (d.empty()) return def;
    std::vector<int> out;
    for (double v : d) out.push_back(static_cast<int>(v));
    return out;
  }

 private:
  const RawConfig& raw_;
  std::vector<std::string>* errors_;
};

}  // namespace

ScenarioConfig parse_config(const std::string& text) {
  std::vector<std::string> errors;
  RawConfig raw = parse_raw(text, errors);

  // unknown sections / keys, with nearest-match hints
  const auto& reg = key_registry();
  for (const auto& [sec, kv] : raw.sections) {
    auto it = reg.find(sec);
    if (it == reg.end()) {
      errors.push_back("unknown section [" + sec + "]");
      continue;
    }
    for (const auto& [key, _] : kv) {
      bool known = dynamic_key_ok(sec, key) ||
                   std::find(it->second.begin(), it->second.end(), key) != it->second.end();
      if (!known) {
        std::string near = nearest_key(sec, key);
        errors.push_back("unknown key '" + key + "' in [" + sec + "]" +
                         (near.empty() ? "" : " (nearest valid key: '" + near + "')"));
      }
    }
  }

  Extractor ex(raw, errors);
  ScenarioConfig cfg;

  cfg.scenario.name = ex.str("scenario", "name", cfg.scenario.name);
  cfg.scenario.seed = static_cast<std::uint64_t>(ex.num("scenario", "seed", 1.0));

  cfg.grid.dim = ex.integer("grid", "dim", cfg.grid.dim);
  cfg.grid.min = ex.num_list("grid", "min", cfg.grid.min);
  cfg.grid.max = ex.num_list("grid", "max", cfg.grid.max);
  cfg.grid.cells = ex.int_list("grid", "cells", cfg.grid.cells);
  cfg.grid.boundary = ex.str("grid", "boundary", cfg.grid.boundary);

  std::string gamma_s = ex.str("pressure", "gamma", "2");
  if (gamma_s == "infinite" || gamma_s == "inf") {
    cfg.pressure.infinite = true;
    cfg.pressure.gamma = 0.0;
  } else {
    cfg.pressure.infinite = false;
    try {
      cfg.pressure.gamma = std::stod(gamma_s);
    } catch (...) {
      errors.push_back("[pressure] gamma: expected a number or 'infinite'");
    }
  }

  cfg.growth.preset = ex.str("growth", "preset", cfg.growth.preset);
  cfg.growth.species = ex.integer("growth", "species", cfg.growth.species);
  cfg.growth.g0 = ex.num("growth", "g0", cfg.growth.g0);
  cfg.growth.delta = ex.num("growth", "delta", cfg.growth.delta);
  cfg.growth.p_h = ex.num("growth", "p_h", cfg.growth.p_h);
  cfg.growth.rates = ex.num_list("growth", "rates", cfg.growth.rates);
  cfg.growth.expressions.clear();
  for (int s = 0; s < std::max(cfg.growth.species, 1); ++s) {
    std::string key = "expr_" + std::to_string(s);
    if (ex.has("growth", key)) cfg.growth.expressions.push_back(ex.str("growth", key, ""));
  }

  cfg.nutrient.enabled = ex.boolean("nutrient", "enabled", cfg.nutrient.enabled);
  cfg.nutrient.alpha = ex.num("nutrient", "alpha", cfg.nutrient.alpha);
  cfg.nutrient.beta = ex.num_list("nutrient", "beta", cfg.nutrient.beta);
  cfg.nutrient.initial = ex.str("nutrient", "initial", cfg.nutrient.initial);
  cfg.nutrient.n0_amplitude = ex.num("nutrient", "n0_amplitude", cfg.nutrient.n0_amplitude);
  cfg.nutrient.n0_sigma = ex.num("nutrient", "n0_sigma", cfg.nutrient.n0_sigma);

  cfg.initial.preset = ex.str("initial", "preset", cfg.initial.preset);
  cfg.initial.t0 = ex.num("initial", "t0", cfg.initial.t0);
  cfg.initial.barenblatt_c = ex.num("initial", "barenblatt_c", cfg.initial.barenblatt_c);
  cfg.initial.blob_center = ex.num("initial", "blob_center", cfg.initial.blob_center);
  cfg.initial.blob_halfwidth =
      ex.num("initial", "blob_halfwidth", cfg.initial.blob_halfwidth);
  cfg.initial.blob_amplitude =
      ex.num("initial", "blob_amplitude", cfg.initial.blob_amplitude);
  cfg.initial.disk_radius = ex.num("initial", "disk_radius", cfg.initial.disk_radius);
  cfg.initial.mollify_k = ex.integer("initial", "mollify_k", cfg.initial.mollify_k);
  cfg.initial.n_file = ex.str("initial", "n_file", cfg.initial.n_file);
  cfg.initial.rho_files.clear();
  for (int s = 0; s < 64; ++s) {
    std::string key = "file_rho_" + std::to_string(s);
    if (ex.has("initial", key)) cfg.initial.rho_files.push_back(ex.str("initial", key, ""));
  }

  cfg.id.id1 = ex.boolean("id", "id1", cfg.id.id1);
  cfg.id.id2 = ex.boolean("id", "id2", cfg.id.id2);
  cfg.id.id3 = ex.boolean("id", "id3", cfg.id.id3);
  cfg.id.id4 = ex.boolean("id", "id4", cfg.id.id4);
  cfg.id.id5 = ex.boolean("id", "id5", cfg.id.id5);
  cfg.id.lambda = ex.num("id", "lambda", cfg.id.lambda);

  cfg.solver.dt = ex.num("solver", "dt", cfg.solver.dt);
  cfg.solver.cfl = ex.num("solver", "cfl", cfg.solver.cfl);
  cfg.solver.tol_fp = ex.num("solver", "tol_fp", cfg.solver.tol_fp);
  cfg.solver.max_fp = ex.integer("solver", "max_fp", cfg.solver.max_fp);
  cfg.solver.eps_min = ex.num("solver", "eps_min", cfg.solver.eps_min);
  cfg.solver.tol_lin = ex.num("solver", "tol_lin", cfg.solver.tol_lin);
  cfg.solver.max_lin = ex.integer("solver", "max_lin", cfg.solver.max_lin);
  cfg.solver.resync = ex.num("solver", "resync", cfg.solver.resync);

  cfg.obstacle.tol = ex.num("obstacle", "tol", cfg.obstacle.tol);
  cfg.obstacle.max_sweeps = ex.integer("obstacle", "max_sweeps", cfg.obstacle.max_sweeps);
  cfg.obstacle.omega = ex.num("obstacle", "omega", cfg.obstacle.omega);

  cfg.time.horizon = ex.num("time", "horizon", cfg.time.horizon);
  cfg.time.sample_dt = ex.num("time", "sample_dt", cfg.time.sample_dt);

  cfg.flows.enabled = ex.boolean("flows", "enabled", cfg.flows.enabled);
  cfg.flows.cfl = ex.num("flows", "cfl", cfg.flows.cfl);
  cfg.flows.history_stride = ex.integer("flows", "history_stride", cfg.flows.history_stride);

  cfg.probe.enabled = ex.boolean("probe", "enabled", cfg.probe.enabled);
  cfg.probe.epsilons = ex.num_list("probe", "epsilons", cfg.probe.epsilons);
  cfg.probe.w_amplitude = ex.num("probe", "w_amplitude", cfg.probe.w_amplitude);
  cfg.probe.horizon_T = ex.num("probe", "horizon_T", cfg.probe.horizon_T);

  cfg.diagnostics.enabled = ex.boolean("diagnostics", "enabled", cfg.diagnostics.enabled);
  cfg.diagnostics.lambda_prime =
      ex.num("diagnostics", "lambda_prime", cfg.diagnostics.lambda_prime);
  cfg.diagnostics.regime = ex.str("diagnostics", "regime", cfg.diagnostics.regime);
  cfg.diagnostics.p_floor = ex.num("diagnostics", "p_floor", cfg.diagnostics.p_floor);

  cfg.output.dir = ex.str("output", "dir", cfg.output.dir);
  cfg.output.snapshots = ex.boolean("output", "snapshots", cfg.output.snapshots);
  cfg.output.snapshot_csv = ex.boolean("output", "snapshot_csv", cfg.output.snapshot_csv);

  // semantic validation (collect every violation)
  if (cfg.grid.dim != 1 && cfg.grid.dim != 2) errors.push_back("[grid] dim must be 1 or 2");
  std::size_t want_axes = cfg.grid.dim == 2 ? 2 : 1;
  if (cfg.grid.min.size() != want_axes || cfg.grid.max.size() != want_axes ||
      cfg.grid.cells.size() != want_axes) {
    errors.push_back("[grid] min/max/cells must each have " +
                     std::to_string(want_axes) + " entries");
  } else {
    for (std::size_t a = 0; a < want_axes; ++a) {
      if (!(cfg.grid.max[a] > cfg.grid.min[a])) {
        errors.push_back("[grid] max must exceed min on every axis");
        break;
      }
      if (cfg.grid.cells[a] < 8) {
        errors.push_back("[grid] cells must be >= 8 per axis");
        break;
      }
    }
  }
  if (cfg.grid.boundary != "truncated" && cfg.grid.boundary != "periodic") {
    errors.push_back("[grid] boundary must be truncated or periodic");
  }
  if (!cfg.pressure.infinite && !(cfg.pressure.gamma >= 1.0)) {
    errors.push_back("[pressure] gamma >= 1 required (or 'infinite')");
  }
  const std::set<std::string> growth_presets = {"linear-homeostatic", "nutrient-gated",
                                                "constant", "expressions"};
  if (!growth_presets.count(cfg.growth.preset)) {
    errors.push_back("[growth] unknown preset '" + cfg.growth.preset + "'");
  }
  if (cfg.growth.species < 1) errors.push_back("[growth] species must be >= 1");
  if (!(cfg.growth.p_h > 0.0)) errors.push_back("[growth] p_h must be positive");
  if (cfg.growth.preset == "constant" &&
      cfg.growth.rates.size() != static_cast<std::size_t>(cfg.growth.species)) {
    errors.push_back("[growth] rates must list one value per species");
  }
  if (cfg.growth.preset == "expressions" &&
      cfg.growth.expressions.size() != static_cast<std::size_t>(cfg.growth.species)) {
    errors.push_back("[growth] expressions preset needs expr_0..expr_{species-1}");
  }
  if (cfg.nutrient.enabled &&
      cfg.nutrient.beta.size() != static_cast<std::size_t>(cfg.growth.species)) {
    errors.push_back("[nutrient] beta must list one value per species");
  }
  const std::set<std::string> initial_presets = {"barenblatt", "two-blob-segregation",
                                                 "tumor-nutrient-disk", "custom-from-file"};
  if (!initial_presets.count(cfg.initial.preset)) {
    errors.push_back("[initial] unknown preset '" + cfg.initial.preset + "'");
  }
  if (cfg.initial.preset == "custom-from-file" &&
      cfg.initial.rho_files.size() != static_cast<std::size_t>(cfg.growth.species)) {
    errors.push_back("[initial] custom-from-file needs file_rho_0..file_rho_{species-1}");
  }
  if (!(cfg.solver.dt > 0.0)) errors.push_back("[solver] dt must be positive");
  if (!(cfg.solver.cfl > 0.0 && cfg.solver.cfl <= 1.0)) {
    errors.push_back("[solver] cfl must lie in (0, 1]");
  }
  if (cfg.solver.max_fp < 2) errors.push_back("[solver] max_fp must be >= 2");
  if (!(cfg.obstacle.omega >= 1.0 && cfg.obstacle.omega < 2.0)) {
    errors.push_back("[obstacle] omega must lie in [1, 2)");
  }
  if (!(cfg.time.horizon >= 0.0)) errors.push_back("[time] horizon must be >= 0");
  if (!(cfg.time.sample_dt > 0.0)) errors.push_back("[time] sample_dt must be positive");
  if (!(cfg.diagnostics.lambda_prime > 0.0 && cfg.diagnostics.lambda_prime <= 1.0)) {
    errors.push_back("[diagnostics] lambda_prime must lie in (0, 1]");
  }
  if (cfg.id.id5 && cfg.diagnostics.lambda_prime > cfg.id.lambda) {
    errors.push_back("[diagnostics] lambda_prime must be <= the declared (ID5) lambda");
  }
  if (cfg.diagnostics.regime != "basic" && cfg.diagnostics.regime != "log-weighted") {
    errors.push_back("[diagnostics] regime must be basic or log-weighted");
  }
  if (cfg.probe.enabled && !(2.0 * cfg.probe.horizon_T <= cfg.time.horizon + 1e-12)) {
    errors.push_back("[probe] needs horizon >= 2*horizon_T");
  }
  if (cfg.probe.enabled && !cfg.flows.enabled) {
    errors.push_back("[probe] requires [flows] enabled = true");
  }

  if (!errors.empty()) {
    std::string msg = "configuration invalid (" + std::to_string(errors.size()) +
                      " violation" + (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open config file " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[scenario]\n";
  os << "name = " << c.scenario.name << "\n";
  os << "seed = " << c.scenario.seed << "\n\n";

  os << "[grid]\n";
  os << "dim = " << c.grid.dim << "\n";
  os << "min = " << fmt_list(c.grid.min) << "\n";
  os << "max = " << fmt_list(c.grid.max) << "\n";
  os << "cells = " << fmt_list(c.grid.cells) << "\n";
  os << "boundary = " << c.grid.boundary << "\n\n";

  os << "[pressure]\n";
  os << "gamma = " << (c.pressure.infinite ? "infinite" : fmt_num(c.pressure.gamma))
     << "\n\n";

  os << "[growth]\n";
  os << "preset = " << c.growth.preset << "\n";
  os << "species = " << c.growth.species << "\n";
  os << "g0 = " << fmt_num(c.growth.g0) << "\n";
  os << "delta = " << fmt_num(c.growth.delta) << "\n";
  os << "p_h = " << fmt_num(c.growth.p_h) << "\n";
  os << "rates = " << fmt_list(c.growth.rates) << "\n";
  for (std::size_t s = 0; s < c.growth.expressions.size(); ++s) {
    os << "expr_" << s << " = " << c.growth.expressions[s] << "\n";
  }
  os << "\n[nutrient]\n";
  os << "enabled = " << (c.nutrient.enabled ? "true" : "false") << "\n";
  os << "alpha = " << fmt_num(c.nutrient.alpha) << "\n";
  os << "beta = " << fmt_list(c.nutrient.beta) << "\n";
  os << "initial = " << c.nutrient.initial << "\n";
  os << "n0_amplitude = " << fmt_num(c.nutrient.n0_amplitude) << "\n";
  os << "n0_sigma = " << fmt_num(c.nutrient.n0_sigma) << "\n\n";

  os << "[initial]\n";
  os << "preset = " << c.initial.preset << "\n";
  os << "t0 = " << fmt_num(c.initial.t0) << "\n";
  os << "barenblatt_c = " << fmt_num(c.initial.barenblatt_c) << "\n";
  os << "blob_center = " << fmt_num(c.initial.blob_center) << "\n";
  os << "blob_halfwidth = " << fmt_num(c.initial.blob_halfwidth) << "\n";
  os << "blob_amplitude = " << fmt_num(c.initial.blob_amplitude) << "\n";
  os << "disk_radius = " << fmt_num(c.initial.disk_radius) << "\n";
  os << "mollify_k = " << c.initial.mollify_k << "\n";
  for (std::size_t s = 0; s < c.initial.rho_files.size(); ++s) {
    os << "file_rho_" << s << " = " << c.initial.rho_files[s] << "\n";
  }
  if (!c.initial.n_file.empty()) os << "n_file = " << c.initial.n_file << "\n";
  os << "\n[id]\n";
  os << "id1 = " << (c.id.id1 ? "true" : "false") << "\n";
  os << "id2 = " << (c.id.id2 ? "true" : "false") << "\n";
  os << "id3 = " << (c.id.id3 ? "true" : "false") << "\n";
  os << "id4 = " << (c.id.id4 ? "true" : "false") << "\n";
  os << "id5 = " << (c.id.id5 ? "true" : "false") << "\n";
  os << "lambda = " << fmt_num(c.id.lambda) << "\n\n";

  os << "[solver]\n";
  os << "dt = " << fmt_num(c.solver.dt) << "\n";
  os << "cfl = " << fmt_num(c.solver.cfl) << "\n";
  os << "tol_fp = " << fmt_num(c.solver.tol_fp) << "\n";
  os << "max_fp = " << c.solver.max_fp << "\n";
  os << "eps_min = " << fmt_num(c.solver.eps_min) << "\n";
  os << "tol_lin = " << fmt_num(c.solver.tol_lin) << "\n";
  os << "max_lin = " << c.solver.max_lin << "\n";
  os << "resync = " << fmt_num(c.solver.resync) << "\n\n";

  os << "[obstacle]\n";
  os << "tol = " << fmt_num(c.obstacle.tol) << "\n";
  os << "max_sweeps = " << c.obstacle.max_sweeps << "\n";
  os << "omega = " << fmt_num(c.obstacle.omega) << "\n\n";

  os << "[time]\n";
  os << "horizon = " << fmt_num(c.time.horizon) << "\n";
  os << "sample_dt = " << fmt_num(c.time.sample_dt) << "\n\n";

  os << "[flows]\n";
  os << "enabled = " << (c.flows.enabled ? "true" : "false") << "\n";
  os << "cfl = " << fmt_num(c.flows.cfl) << "\n";
  os << "history_stride = " << c.flows.history_stride << "\n\n";

  os << "[probe]\n";
  os << "enabled = " << (c.probe.enabled ? "true" : "false") << "\n";
  os << "epsilons = " << fmt_list(c.probe.epsilons) << "\n";
  os << "w_amplitude = " << fmt_num(c.probe.w_amplitude) << "\n";
  os << "horizon_T = " << fmt_num(c.probe.horizon_T) << "\n\n";

  os << "[diagnostics]\n";
  os << "enabled = " << (c.diagnostics.enabled ? "true" : "false") << "\n";
  os << "lambda_prime = " << fmt_num(c.diagnostics.lambda_prime) << "\n";
  os << "regime = " << c.diagnostics.regime << "\n";
  os << "p_floor = " << fmt_num(c.diagnostics.p_floor) << "\n\n";

  os << "[output]\n";
  os << "dir = " << c.output.dir << "\n";
  os << "snapshots = " << (c.output.snapshots ? "true" : "false") << "\n";
  os << "snapshot_csv = " << (c.output.snapshot_csv ? "true" : "false") << "\n";
  return os.str();
}

bool config_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
  return render_config(a) == render_config(b);
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

std::vector<std::string> scenario_preset_names() {
  return {"barenblatt",       "two-blob-segregation", "two-blob-incompressible",
          "segregation-counterexample", "tumor-nutrient-disk", "gamma-sweep-base"};
}

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig c;
  c.scenario.name = name;
  if (name == "barenblatt") {
    c.grid = {1, {-8.0}, {8.0}, {512}, "truncated"};
    c.pressure = {false, 2.0};
    c.growth.preset = "constant";
    c.growth.species = 1;
    c.growth.rates = {0.0};
    c.growth.p_h = 1.0;
    c.initial.preset = "barenblatt";
    c.initial.t0 = 1.0;
    c.initial.barenblatt_c = 0.75;
    c.solver.dt = 0.005;
    c.time.horizon = 1.0;
    c.time.sample_dt = 0.125;
    c.flows.enabled = true;
    c.diagnostics.regime = "basic";
    c.output.dir = "out/barenblatt";
    return c;
  }
  if (name == "two-blob-segregation" || name == "two-blob-incompressible" ||
      name == "segregation-counterexample") {
    c.grid = {1, {-4.0}, {4.0}, {512}, "truncated"};
    c.growth.species = 2;
    c.initial.preset = "two-blob-segregation";
    c.initial.t0 = 0.0;
    c.initial.blob_center = 0.8;
    c.initial.blob_halfwidth = 0.45;
    c.initial.blob_amplitude = 0.8;
    c.solver.dt = 0.0025;
    c.time.horizon = 1.0;
    c.time.sample_dt = 0.125;
    c.flows.enabled = true;
    if (name == "two-blob-segregation") {
      c.pressure = {false, 10.0};
      c.growth.preset = "linear-homeostatic";
      c.growth.g0 = 0.4;
      c.growth.p_h = 1.0;
      c.growth.rates = {0.0, 0.0};
      c.output.dir = "out/two-blob";
    } else if (name == "two-blob-incompressible") {
      c.pressure.infinite = true;
      c.growth.preset = "linear-homeostatic";
      c.growth.g0 = 0.4;
      c.growth.p_h = 1.0;
      c.growth.rates = {0.0, 0.0};
      c.id.id4 = true;
      c.id.id5 = true;
      c.id.lambda = 0.5;
      c.diagnostics.regime = "log-weighted";
      c.output.dir = "out/two-blob-incompressible";
    } else {
      // the instant-mixing pair: G_1(0,0) > 0, G_2(0,0) < 0, zero nutrient,
      // blocks sharing a codimension-1 boundary, both saturated
      c.pressure.infinite = true;
      c.growth.preset = "constant";
      c.growth.rates = {0.5, -0.5};
      c.growth.p_h = 1.0;
      c.initial.blob_center = 0.45;
      c.initial.blob_halfwidth = 0.45;  // touching at x = 0
      c.id.id4 = true;
      c.diagnostics.regime = "log-weighted";
      c.output.dir = "out/counterexample";
    }
    return c;
  }
  if (name == "tumor-nutrient-disk") {
    c.grid = {2, {-4.0, -4.0}, {4.0, 4.0}, {64, 64}, "truncated"};
    c.pressure = {false, 4.0};
    c.growth.preset = "nutrient-gated";
    c.growth.species = 1;
    c.growth.g0 = 1.0;
    c.growth.delta = 1.5;
    c.growth.p_h = 1.0;
    c.growth.rates = {0.0};
    c.nutrient.enabled = true;
    c.nutrient.alpha = 0.5;
    c.nutrient.beta = {0.5};
    c.nutrient.initial = "uniform";
    c.nutrient.n0_amplitude = 1.0;
    c.initial.preset = "tumor-nutrient-disk";
    c.initial.disk_radius = 1.2;
    c.initial.blob_amplitude = 0.9;
    c.solver.dt = 0.01;
    c.time.horizon = 0.5;
    c.time.sample_dt = 0.125;
    c.output.dir = "out/tumor-disk";
    return c;
  }
  if (name == "gamma-sweep-base") {
    c.grid = {1, {-4.0}, {4.0}, {256}, "truncated"};
    c.pressure.infinite = true;
    c.growth.preset = "linear-homeostatic";
    c.growth.species = 1;
    c.growth.g0 = 1.0;
    c.growth.p_h = 1.0;
    c.growth.rates = {0.0};
    c.initial.preset = "two-blob-segregation";  // single saturated interval below
    c.initial.blob_center = 0.0;
    c.initial.blob_halfwidth = 0.75;
    c.initial.blob_amplitude = 1.0;
    c.id.id4 = true;
    c.solver.dt = 0.0025;
    c.time.horizon = 0.25;
    c.time.sample_dt = 0.125;
    c.diagnostics.regime = "log-weighted";
    c.output.dir = "out/gamma-sweep";
    return c;
  }
  throw std::invalid_argument("unknown scenario preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// run_scenario
// ---------------------------------------------------------------------------

namespace {

GridSpec build_grid(const ScenarioConfig& cfg) {
  BoundaryMode mode = boundary_mode_from_name(cfg.grid.boundary);
  if (cfg.grid.dim == 1) {
    return GridSpec::make1d(cfg.grid.min[0], cfg.grid.max[0], cfg.grid.cells[0], mode);
  }
  return GridSpec::make2d(cfg.grid.min[0], cfg.grid.max[0], cfg.grid.cells[0],
                          cfg.grid.min[1], cfg.grid.max[1], cfg.grid.cells[1], mode);
}

GrowthModel build_growth(const ScenarioConfig& cfg) {
  std::size_t l = static_cast<std::size_t>(cfg.growth.species);
  if (cfg.growth.preset == "linear-homeostatic") {
    return growth_linear_homeostatic(l, cfg.growth.g0, cfg.growth.p_h);
  }
  if (cfg.growth.preset == "nutrient-gated") {
    return growth_nutrient_gated(l, cfg.growth.g0, cfg.growth.delta, cfg.growth.p_h);
  }
  if (cfg.growth.preset == "constant") {
    return growth_constant(cfg.growth.rates, cfg.growth.p_h);
  }
  return growth_from_expressions(cfg.growth.expressions, cfg.growth.p_h);
}

double barenblatt_density_profile(double gamma, int dim, double big_c, double t,
                                  double r2) {
  double beta = 1.0 / (dim * gamma + 2.0);
  double alpha = dim * beta;
  double k = beta * gamma / (2.0 * (gamma + 1.0));
  double tau = gamma / (gamma + 1.0) * t;
  double inner = big_c - k * r2 * std::pow(tau, -2.0 * beta);
  if (inner <= 0.0) return 0.0;
  return std::pow(tau, -alpha) * std::pow(inner, 1.0 / gamma);
}

ScalarField build_nutrient_field(const ScenarioConfig& cfg, const GridSpec& g) {
  ScalarField n(g, 0.0, "n");
  n.time = cfg.initial.t0;
  if (!cfg.initial.n_file.empty()) {
    std::filesystem::path stem = cfg.initial.n_file;
    n = read_field(stem);
    n.name = "n";
    return n;
  }
  if (cfg.nutrient.initial == "uniform") {
    for (double& v : n.values) v = cfg.nutrient.n0_amplitude;
  } else if (cfg.nutrient.initial == "gaussian") {
    double s2 = 2.0 * cfg.nutrient.n0_sigma * cfg.nutrient.n0_sigma;
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double x = g.center(0, i);
        double r2 = x * x;
        if (g.dim == 2) {
          double y = g.center(1, j);
          r2 += y * y;
        }
        n.at(i, j) = cfg.nutrient.n0_amplitude * std::exp(-r2 / s2);
      }
    }
  }
  return n;
}

std::vector<ScalarField> build_initial_densities(const ScenarioConfig& cfg,
                                                 const GridSpec& g) {
  const std::size_t l = static_cast<std::size_t>(cfg.growth.species);
  std::vector<ScalarField> rho;
  for (std::size_t s = 0; s < l; ++s) {
    rho.emplace_back(g, 0.0, "rho_" + std::to_string(s));
    rho.back().time = cfg.initial.t0;
  }

  if (cfg.initial.preset == "barenblatt") {
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double x = g.center(0, i);
        double r2 = x * x;
        if (g.dim == 2) {
          double y = g.center(1, j);
          r2 += y * y;
        }
        double v = barenblatt_density_profile(cfg.pressure.gamma, g.dim,
                                              cfg.initial.barenblatt_c,
                                              cfg.initial.t0, r2);
        for (std::size_t s = 0; s < l; ++s) rho[s].at(i, j) = v / static_cast<double>(l);
      }
    }
    return rho;
  }
  if (cfg.initial.preset == "two-blob-segregation") {
    // species s gets a blob centered at (-1)^{s+1} * blob_center (single
    // species: centered at blob_center); incompressible data uses indicator
    // blocks ({0,1} a.e.), compressible data smooth quartic bumps
    for (int i = 0; i < g.nx(); ++i) {
      double x = g.center(0, i);
      for (std::size_t s = 0; s < l; ++s) {
        double center = l == 1 ? cfg.initial.blob_center
                               : (s == 0 ? -cfg.initial.blob_center : cfg.initial.blob_center);
        double u = (x - center) / cfg.initial.blob_halfwidth;
        double v = 0.0;
        if (cfg.pressure.infinite) {
          v = std::abs(u) <= 1.0 ? 1.0 : 0.0;
        } else {
          double b = 1.0 - u * u;
          v = b > 0.0 ? cfg.initial.blob_amplitude * b * b : 0.0;
        }
        for (int j = 0; j < g.ny(); ++j) rho[s].at(i, j) = v;
      }
    }
    return rho;
  }
  if (cfg.initial.preset == "tumor-nutrient-disk") {
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double x = g.center(0, i);
        double y = g.dim == 2 ? g.center(1, j) : 0.0;
        double u = std::sqrt(x * x + y * y) / cfg.initial.disk_radius;
        double b = 1.0 - u * u;
        double v = b > 0.0 ? cfg.initial.blob_amplitude * b * b : 0.0;
        for (std::size_t s = 0; s < l; ++s) rho[s].at(i, j) = v / static_cast<double>(l);
      }
    }
    return rho;
  }
  // custom-from-file
  for (std::size_t s = 0; s < l; ++s) {
    rho[s] = read_field(cfg.initial.rho_files[s]);
    rho[s].name = "rho_" + std::to_string(s);
  }
  return rho;
}

VectorField probe_perturbation(const GridSpec& g, double amplitude) {
  VectorField w(g, 0.0);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double x = g.center(0, i);
      double lx = g.hi[0] - g.lo[0];
      w.at(0, i, j) = amplitude * std::sin(2.0 * M_PI * (x - g.lo[0]) / lx);
      if (g.dim == 2) {
        double y = g.center(1, j);
        double ly = g.hi[1] - g.lo[1];
        w.at(1, i, j) = amplitude * std::sin(2.0 * M_PI * (y - g.lo[1]) / ly);
      }
    }
  }
  return w;
}

void block_average_bounds(const ScalarField& dep, const ScalarField& rho, double band,
                          double mass_floor, double* eps_out) {
  // weak-sense pushforward comparison: 4^d-cell block averages must fall in
  // [band^-1 (1-eps), band (1+eps)]; returns the smallest eps that fits
  const GridSpec& g = dep.grid;
  const int bs = 4;
  double eps = 0.0;
  for (int j0 = 0; j0 < g.ny(); j0 += g.dim == 2 ? bs : 1) {
    for (int i0 = 0; i0 < g.nx(); i0 += bs) {
      double a = 0.0, b = 0.0;
      int cnt = 0;
      for (int j = j0; j < std::min(j0 + (g.dim == 2 ? bs : 1), g.ny()); ++j) {
        for (int i = i0; i < std::min(i0 + bs, g.nx()); ++i) {
          a += dep.at(i, j);
          b += rho.at(i, j);
          ++cnt;
        }
      }
      a /= cnt;
      b /= cnt;
      if (a < mass_floor && b < mass_floor) continue;
      double lo = b / band;
      double hi = b * band;
      if (a < lo) eps = std::max(eps, (lo - a) / std::max(lo, mass_floor));
      if (a > hi) eps = std::max(eps, (a - hi) / std::max(hi, mass_floor));
    }
  }
  *eps_out = eps;
}

}  // namespace

bool ScenarioRunSummary::all_passed() const {
  for (const auto& c : checks) {
    if (c.hard && !c.pass) return false;
  }
  return true;
}

namespace {

void write_summary_json(const std::filesystem::path& file,
                        const ScenarioRunSummary& sum) {
  json checks = json::array();
  for (const auto& c : sum.checks) {
    checks.push_back(json{{"name", c.name},
                          {"pass", c.pass},
                          {"hard", c.hard},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"note", c.note}});
  }
  json j{{"scenario", sum.scenario_name},
         {"config_fingerprint", sum.config_fingerprint},
         {"checks", checks},
         {"constants", sum.constants},
         {"files", sum.files}};
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file.string());
  os << j.dump(2) << "\n";
}

}  // namespace

ScenarioRunSummary run_scenario(const ScenarioConfig& cfg,
                                const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  ScenarioRunSummary sum;
  sum.scenario_name = cfg.scenario.name;
  std::string rendered = render_config(cfg);
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(fnv1a64(rendered)));
  sum.config_fingerprint = fp;
  {
    std::ofstream os(outdir / "config.ini");
    os << rendered;
    sum.files.push_back("config.ini");
  }

  const GridSpec grid = build_grid(cfg);
  const PressureLaw law =
      cfg.pressure.infinite ? PressureLaw::hele_shaw() : PressureLaw::finite(cfg.pressure.gamma);
  GrowthModel model = build_growth(cfg);

  // assumption validation on [0, p_h + 1] x [0, n_max]
  double n_max = cfg.nutrient.enabled ? std::max(1.0, cfg.nutrient.n0_amplitude) : 1.0;
  AssumptionReport assumptions =
      validate_assumptions(model, model.p_h + 1.0, n_max, 64);
  if (model.bound <= 0.0) model.bound = assumptions.measured_bound;
  sum.constants["measured_growth_bound"] = assumptions.measured_bound;
  sum.checks.push_back({"assumptions-declared", assumptions.declared_hold(), true,
                        assumptions.get("G4").worst_value, 0.0,
                        "declared G-flags hold on the sampled rectangle"});

  std::vector<ScalarField> rho0 = build_initial_densities(cfg, grid);
  ScalarField n0 = build_nutrient_field(cfg, grid);

  // (ID) declarations checked against the actual data
  {
    ScalarField tot(grid, 0.0);
    for (const auto& r : rho0) {
      for (std::size_t c = 0; c < tot.values.size(); ++c) tot.values[c] += r.values[c];
    }
    if (cfg.id.id4) {
      double worst = 0.0;
      for (double v : tot.values) {
        worst = std::max(worst, std::min(std::abs(v), std::abs(v - 1.0)));
      }
      sum.checks.push_back({"id4-binary-density", worst <= 1e-9, true, worst, 1e-9,
                            "declared (ID4) requires rho0 in {0,1}"});
    }
    if (cfg.id.id1 && !cfg.pressure.infinite) {
      double cap = std::pow(model.p_h, 1.0 / law.gamma);
      double worst = tot.max_value();
      sum.checks.push_back({"id1-density-cap", worst <= cap * (1.0 + 1e-9), true, worst,
                            cap, "declared (ID1) requires rho0 <= p_h^{1/gamma}"});
    }
  }

  SpeciesState state = make_species_state(rho0, n0, law);
  state.t = cfg.initial.t0;
  for (auto& r : state.rho_i) r.time = state.t;
  state.rho.time = state.t;
  state.p.time = state.t;
  state.n.time = state.t;
  if (cfg.initial.mollify_k > 0) {
    bool degenerate = false;
    state = mollify_initial_data(state.rho_i, state.n, {cfg.initial.mollify_k}, law,
                                 &degenerate);
    state.t = cfg.initial.t0;
    if (degenerate) {
      sum.checks.push_back({"mollifier-width", false, false,
                            1.0 / cfg.initial.mollify_k, grid.spacing(0),
                            "mollifier width below grid spacing (identity)"});
    }
  }
  if (law.infinite) {
    state.p = initial_complementarity_pressure(
                  state, model, {cfg.obstacle.tol, cfg.obstacle.max_sweeps,
                                 cfg.obstacle.omega})
                  .p;
    state.p.time = state.t;
  }

  NutrientParams nutrient;
  nutrient.enabled = cfg.nutrient.enabled;
  nutrient.alpha = cfg.nutrient.alpha;
  nutrient.beta = cfg.nutrient.beta;

  SolverConfig scfg;
  scfg.dt = cfg.solver.dt;
  scfg.cfl = cfg.solver.cfl;
  scfg.tol_fp = cfg.solver.tol_fp;
  scfg.max_fp = cfg.solver.max_fp;
  scfg.eps_min = cfg.solver.eps_min;
  scfg.tol_lin = cfg.solver.tol_lin;
  scfg.max_lin = cfg.solver.max_lin;
  scfg.resync_weight = cfg.solver.resync;

  WeightSpec weight = build_weight(
      cfg.diagnostics.lambda_prime, law,
      cfg.diagnostics.regime == "basic" ? WeightRegime::Basic : WeightRegime::LogWeighted,
      model.p_h, cfg.diagnostics.p_floor);
  DiagnosticsAccumulator diag(model, law, weight, cfg.diagnostics.p_floor, cfg.solver.dt);

  // sample times: t0, t0+sample_dt, ..., t0+horizon (midpoint added for the
  // semigroup check)
  std::vector<double> samples;
  const double t0 = state.t;
  const double T = cfg.time.horizon;
  for (double t = t0;; t += cfg.time.sample_dt) {
    samples.push_back(std::min(t, t0 + T));
    if (t >= t0 + T - 1e-12) break;
  }
  double midpoint = t0 + 0.5 * T;
  bool have_mid = false;
  for (double t : samples) {
    if (std::abs(t - midpoint) < 1e-12) have_mid = true;
  }
  if (!have_mid && T > 0.0) samples.push_back(midpoint);
  std::sort(samples.begin(), samples.end());

  RunOptions opts;
  opts.sample_times = samples;
  opts.record_history = cfg.flows.enabled || cfg.probe.enabled;
  opts.history_stride = cfg.flows.history_stride;
  std::size_t next_sample = 1;  // samples[0] handled below
  if (cfg.diagnostics.enabled) diag.sample(state);
  opts.on_substep = [&](const SpeciesState& s, double dt_sub) {
    if (!cfg.diagnostics.enabled) return;
    diag.accumulate(s, dt_sub);
    while (next_sample < samples.size() && s.t >= samples[next_sample] - 1e-12) {
      diag.sample(s);
      ++next_sample;
    }
  };

  const double mass0 = integrate(state.rho);
  const EntropyMoments em0 = entropy_and_moments(state, cfg.diagnostics.p_floor);
  const SpeciesState initial_state = state;

  // --- run ---
  std::vector<SpeciesState> snapshots;
  FieldHistory history;
  std::vector<SeriesPoint> series;
  double source_mass_total = 0.0;
  bool fp_unconverged = false;
  bool buffer_warning = false;
  double worst_saturated_drop = 0.0;
  bool growth_nonnegative_sampled = true;
  {
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < model.count(); ++s) {
      for (int k = 0; k <= 32; ++k) {
        for (int kn = 0; kn <= 8; ++kn) {
          gmin = std::min(gmin, model.growth(s, model.p_h * k / 32.0, n_max * kn / 8.0));
        }
      }
    }
    growth_nonnegative_sampled = gmin >= 0.0;
  }

  if (!law.infinite) {
    PmeSolver solver(model, law, scfg, nutrient);
    RunResult run = run_pme(solver, state, T, opts);
    state = run.final_state;
    snapshots = std::move(run.snapshots);
    history = std::move(run.history);
    series = std::move(run.series);
    source_mass_total = run.source_mass_total;
    fp_unconverged = run.any_fp_unconverged;
    buffer_warning = run.buffer_warning;
  } else {
    ObstacleConfig ob{cfg.obstacle.tol, cfg.obstacle.max_sweeps, cfg.obstacle.omega};
    HeleShawSolver solver(model, ob, scfg, nutrient);
    HeleShawRunResult run = run_hele_shaw(solver, state, T, opts);
    state = run.final_state;
    snapshots = std::move(run.snapshots);
    history = std::move(run.history);
    series = std::move(run.series);
    source_mass_total = run.source_mass_total;
    fp_unconverged = run.any_unconverged;
    worst_saturated_drop = run.worst_saturated_drop;
  }

  // --- invariant checks ---
  double min_rho = 0.0, max_p_series = 0.0;
  for (const auto& pt : series) {
    min_rho = std::min(min_rho, pt.min_rho);
    max_p_series = std::max(max_p_series, pt.max_p);
  }
  sum.checks.push_back({"nonnegativity", min_rho >= -1e-10, true, min_rho, -1e-10,
                        "min_i min_x rho_i over all steps"});
  const double mass_T = integrate(state.rho);
  if (model.bound == 0.0) {
    sum.checks.push_back({"mass-conservation", std::abs(mass_T - mass0) <= 1e-10, true,
                          std::abs(mass_T - mass0), 1e-10,
                          "G = 0: flux-form transport conserves mass"});
  }
  const double ledger_qt =
      cfg.diagnostics.enabled && diag.report().find_last("mass_source_qt")
          ? diag.report().find_last("mass_source_qt")->value
          : source_mass_total;
  double ledger_residual = std::abs(mass_T - mass0 - ledger_qt);
  sum.checks.push_back({"mass-ledger", ledger_residual <= 0.01 * std::max(mass0, 1e-12),
                        true, ledger_residual, 0.01 * mass0,
                        "|m(T) - m(0) - int rho G| vs 1% of initial mass"});
  sum.constants["mass_initial"] = mass0;
  sum.constants["mass_final"] = mass_T;
  sum.constants["source_mass_discrete"] = source_mass_total;
  if (model.g2) {
    sum.checks.push_back({"maximum-principle",
                          max_p_series <= model.p_h * (1.0 + 1e-6), true, max_p_series,
                          model.p_h * (1.0 + 1e-6), "max_t max_x p under (G2)"});
  }
  {
    auto inv = state.check_invariants(model);
    sum.checks.push_back({"fractions-sum", inv.fractions_ok, true,
                          inv.max_fraction_defect, 1e-8, "sum_i c_i = 1 off vacuum"});
    if (!law.infinite) {
      sum.checks.push_back({"pressure-consistency", inv.pressure_consistent, true,
                            inv.pressure_defect, 1e-12, "|p - rho^gamma|_inf"});
    }
    sum.checks.push_back({"support-buffer", !buffer_warning && inv.buffer_ok, false,
                          static_cast<double>(inv.support_buffer), 4.0,
                          "cells between support and boundary"});
  }
  sum.checks.push_back({"fixed-point-converged", !fp_unconverged, false, 0.0, 0.0,
                        law.infinite ? "PSOR converged at every step"
                                     : "pressure fixed point converged at every step"});
  if (law.infinite) {
    double compl_defect = 0.0;
    double gmax = gradient(state.p).max_norm();
    for (std::size_t c = 0; c < state.p.values.size(); ++c) {
      compl_defect = std::max(compl_defect, std::max(state.p.values[c], 0.0) *
                                                std::abs(1.0 - state.rho.values[c]));
    }
    double tol_compl = std::max(1e-6 * model.p_h, 2.0 * grid.spacing(0) * gmax);
    sum.checks.push_back({"complementarity", compl_defect <= tol_compl, true,
                          compl_defect, tol_compl, "max p|1 - rho| after repair"});
    sum.checks.push_back({"rho-bound", state.rho.max_value() <= 1.0 + 1e-6, true,
                          state.rho.max_value(), 1.0 + 1e-6, "rho <= 1 + 1e-6"});
    if (growth_nonnegative_sampled) {
      sum.checks.push_back({"monotone-saturation", worst_saturated_drop >= -1e-10, true,
                            worst_saturated_drop, -1e-10,
                            "rho nondecreasing on the saturated set (G >= 0)"});
    }
  }
  // second-moment growth bound (desk-scale factor 1.1)
  if (cfg.diagnostics.enabled && !law.infinite) {
    const DiagnosticsRow* m2 = diag.report().find_last("second_moment");
    const DiagnosticsRow* rg = diag.report().find_last("rho_grad_p_sq_qt");
    if (m2 != nullptr && rg != nullptr) {
      double bound = std::exp(T * (model.bound + 1.0)) *
                     (em0.second_moment + rg->value) * 1.1;
      sum.checks.push_back({"second-moment-bound", m2->value <= bound, true, m2->value,
                            bound, "int |x|^2 rho(T) vs e^{T(B+1)} bound"});
    }
  }

  // --- flows ---
  if (cfg.flows.enabled && T > 0.0 && !history.empty()) {
    HistoryVelocity vel(history);
    FlowAdvanceOptions fopts;
    fopts.cfl = cfg.flows.cfl;
    fopts.model = &model;
    fopts.history = &history;
    fopts.law = &law;

    ParticleEnsemble ens0 = seed_ensemble(initial_state);
    FlowMapRecord xrec = advance_forward(ens0, vel, T, fopts);
    ParticleEnsemble ensT = seed_ensemble(state);
    FlowMapRecord yrec = advance_backward(ensT, vel, T, fopts);
    ResidualReport inv = check_inversion(xrec, yrec);
    sum.constants["inversion_residual"] = inv.weighted_l1;
    sum.constants["inversion_residual_rel"] =
        inv.total_weight > 0.0 ? inv.weighted_l1 / inv.total_weight : 0.0;

    // semigroup through the midpoint snapshot
    const SpeciesState* mid_state = nullptr;
    for (const auto& snap : snapshots) {
      if (std::abs(snap.t - midpoint) < 1e-9) mid_state = &snap;
    }
    if (mid_state != nullptr) {
      FlowMapRecord leg1 = advance_forward(ens0, vel, 0.5 * T, fopts);
      ParticleEnsemble ens_mid = seed_ensemble(*mid_state);
      FlowMapRecord leg2 = advance_forward(ens_mid, vel, 0.5 * T, fopts);
      ResidualReport semi = check_semigroup(xrec, leg1, leg2);
      sum.constants["semigroup_residual"] = semi.weighted_l1;
      sum.constants["semigroup_residual_rel"] =
          semi.total_weight > 0.0 ? semi.weighted_l1 / semi.total_weight : 0.0;
    }

    // pushforward sandwich (weak, block-averaged) and plain L1 distance
    ScalarField dep = deposit(xrec.ensemble, grid);
    double eps_num = 0.0;
    block_average_bounds(dep, state.rho, std::exp(model.bound * T),
                         1e-9 * std::max(state.rho.max_value(), 1e-300), &eps_num);
    sum.constants["pushforward_eps"] = eps_num;
    sum.constants["deposit_l1_rel"] =
        mass_T > 0.0 ? distance_l1(dep, state.rho) / mass_T : 0.0;

    // representation formula per species
    for (std::size_t s = 0; s < state.species_count(); ++s) {
      ScalarField rec = deposit_species(xrec.ensemble, s, grid);
      double denom = norm_l1(state.rho_i[s]);
      sum.constants["reconstruct_l1_rel_" + std::to_string(s)] =
          denom > 0.0 ? distance_l1(rec, state.rho_i[s]) / denom : 0.0;
    }

    // trajectory pressure ledger
    if (!law.infinite) {
      KahanAccumulator ledger, wsum;
      for (std::size_t j = 0; j < xrec.ensemble.size(); ++j) {
        double p_end =
            std::max(history.pressure(state.t, xrec.ensemble.pos[j]), 0.0);
        double delta = p_end - xrec.ensemble.p_start[j];
        ledger.add(xrec.ensemble.w[j] * std::abs(delta - xrec.ensemble.p_ledger[j]));
        wsum.add(xrec.ensemble.w[j]);
      }
      sum.constants["trajectory_ledger_l1"] =
          wsum.value() > 0.0 ? ledger.value() / wsum.value() : 0.0;
    }

    export_trajectories(outdir / "trajectories.csv", {xrec, yrec});
    sum.files.push_back("trajectories.csv");
  }

  // --- probes ---
  if (cfg.probe.enabled && !history.empty()) {
    VectorField w = probe_perturbation(grid, cfg.probe.w_amplitude);
    for (double eps : cfg.probe.epsilons) {
      ProbeResult pr = evaluate_stability_probe(history, w, eps, cfg.probe.horizon_T,
                                                cfg.diagnostics.lambda_prime, model.bound);
      diag.report().probes.push_back(pr);
    }
    bool monotone = true;
    const auto& probes = diag.report().probes;
    for (std::size_t k = 1; k < probes.size(); ++k) {
      if (probes[k].epsilon < probes[k - 1].epsilon &&
          probes[k].sup_forward_distance > probes[k - 1].sup_forward_distance + 1e-15) {
        monotone = false;
      }
    }
    sum.checks.push_back({"probe-distance-monotone", monotone, false, 0.0, 0.0,
                          "sup int rho_bar |X-S| decreases with epsilon"});
  }

  // --- outputs ---
  if (cfg.output.snapshots) {
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
      const SpeciesState& snap = snapshots[k];
      std::string base = "snapshot_" + std::to_string(k);
      for (std::size_t s = 0; s < snap.rho_i.size(); ++s) {
        write_field(outdir / (base + "_rho_" + std::to_string(s)), snap.rho_i[s]);
      }
      write_field(outdir / (base + "_p"), snap.p);
      write_field(outdir / (base + "_n"), snap.n);
      if (cfg.output.snapshot_csv) {
        write_field_csv(outdir / (base + "_rho.csv"), snap.rho);
      }
    }
    sum.files.push_back("snapshot_*");
  }
  write_checkpoint(outdir / "checkpoint", state, static_cast<int>(series.size()),
                   sum.config_fingerprint, source_mass_total);
  sum.files.push_back("checkpoint/");
  if (cfg.diagnostics.enabled) {
    diag.report().write_csv(outdir / "diagnostics.csv");
    diag.report().write_manifest(outdir / "diagnostics_manifest.json");
    sum.files.push_back("diagnostics.csv");
    sum.files.push_back("diagnostics_manifest.json");
  }
  sum.constants["g2_declared"] = model.g2 ? 1.0 : 0.0;
  sum.constants["p_h"] = model.p_h;
  sum.constants["bound_B"] = model.bound;
  sum.constants["gamma"] = law.infinite ? -1.0 : law.gamma;
  sum.constants["h"] = grid.spacing(0);
  sum.constants["dt"] = cfg.solver.dt;
  write_summary_json(outdir / "summary.json", sum);
  sum.files.push_back("summary.json");
  return sum;
}

ScenarioRunSummary run_gamma_sweep(const ScenarioConfig& cfg,
                                   const std::vector<double>& gammas,
                                   const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  ScenarioRunSummary sum;
  sum.scenario_name = cfg.scenario.name + "-gamma-sweep";
  std::string rendered = render_config(cfg);
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(fnv1a64(rendered)));
  sum.config_fingerprint = fp;

  const GridSpec grid = build_grid(cfg);
  GrowthModel model = build_growth(cfg);
  std::vector<ScalarField> rho0 = build_initial_densities(cfg, grid);
  ScalarField n0 = build_nutrient_field(cfg, grid);
  ObstacleConfig ob{cfg.obstacle.tol, cfg.obstacle.max_sweeps, cfg.obstacle.omega};

  SpeciesState seed_state = make_species_state(rho0, n0, PressureLaw::hele_shaw());
  ScalarField p0 = initial_complementarity_pressure(seed_state, model, ob).p;

  SolverConfig scfg;
  scfg.dt = cfg.solver.dt;
  scfg.cfl = cfg.solver.cfl;
  scfg.tol_fp = cfg.solver.tol_fp;
  scfg.max_fp = cfg.solver.max_fp;
  scfg.eps_min = cfg.solver.eps_min;
  scfg.tol_lin = cfg.solver.tol_lin;
  scfg.max_lin = cfg.solver.max_lin;
  scfg.resync_weight = cfg.solver.resync;
  NutrientParams nutrient;
  nutrient.enabled = cfg.nutrient.enabled;
  nutrient.alpha = cfg.nutrient.alpha;
  nutrient.beta = cfg.nutrient.beta;

  GammaSweepResult sweep = gamma_sweep(rho0, n0, p0, model, gammas, cfg.time.horizon,
                                       scfg, ob, nutrient);

  // initial-data consistency |rho0_{i,gamma} - rho0_i|_L1 per gamma
  std::vector<double> id_consistency;
  {
    ScalarField tot(grid, 0.0);
    for (const auto& r : rho0) {
      for (std::size_t c = 0; c < tot.values.size(); ++c) tot.values[c] += r.values[c];
    }
    for (double gamma : gammas) {
      KahanAccumulator acc;
      for (std::size_t s = 0; s < rho0.size(); ++s) {
        for (std::size_t c = 0; c < tot.values.size(); ++c) {
          double pv = std::max(p0.values[c], 0.0);
          double rg = pv > 0.0 ? std::pow(pv, 1.0 / gamma) : 0.0;
          double ri = tot.values[c] > 0.0 ? rg * rho0[s].values[c] / tot.values[c] : 0.0;
          acc.add(std::abs(ri - rho0[s].values[c]));
        }
      }
      id_consistency.push_back(acc.value() * grid.cell_volume());
    }
  }

  // CSV table + JSON metadata (runtime is wall-clock and excluded from the
  // determinism contract; all other columns are deterministic)
  {
    std::ofstream os(outdir / "sweep.csv");
    os << "gamma,defect_l1_qt,p_distance_l2,rho_distance_l1,runtime_seconds\n";
    char buf[200];
    for (const auto& row : sweep.rows) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.6f\n",
                    row.is_limit ? "inf" : fmt_num(row.gamma).c_str(),
                    row.defect_l1_qt, row.p_distance_l2, row.rho_distance_l1,
                    row.runtime_seconds);
      os << buf;
    }
    sum.files.push_back("sweep.csv");
  }
  {
    json meta{{"gammas", gammas},
              {"horizon", cfg.time.horizon},
              {"grid_cells", grid.cells[0]},
              {"id_consistency_l1", id_consistency},
              {"note", "runtime_seconds is wall-clock and not covered by the "
                       "determinism contract"}};
    std::ofstream os(outdir / "sweep_meta.json");
    os << meta.dump(2) << "\n";
    sum.files.push_back("sweep_meta.json");
  }

  bool defect_decreasing = true;
  for (std::size_t k = 1; k + 1 < sweep.rows.size(); ++k) {  // skip the limit row
    if (!(sweep.rows[k].defect_l1_qt < sweep.rows[k - 1].defect_l1_qt)) {
      defect_decreasing = false;
    }
  }
  sum.checks.push_back({"defect-decreasing", defect_decreasing, true,
                        sweep.rows.empty() ? 0.0 : sweep.rows.front().defect_l1_qt, 0.0,
                        "|p_gamma(1-rho_gamma)|_L1(QT) decreases along the gamma list"});
  bool id_decreasing = true;
  for (std::size_t k = 1; k < id_consistency.size(); ++k) {
    if (!(id_consistency[k] <= id_consistency[k - 1] * (1.0 + 1e-12))) id_decreasing = false;
  }
  sum.checks.push_back({"id-consistency-decreasing", id_decreasing, true,
                        id_consistency.empty() ? 0.0 : id_consistency.back(), 0.0,
                        "|rho0_{i,gamma} - rho0_i|_L1 decreases in gamma"});
  if (!sweep.rows.empty()) {
    const auto& last_finite = sweep.rows[sweep.rows.size() - 2];
    sum.constants["defect_at_max_gamma"] = last_finite.defect_l1_qt;
  }
  for (std::size_t k = 0; k < id_consistency.size(); ++k) {
    sum.constants["id_consistency_" + fmt_num(gammas[k])] = id_consistency[k];
  }
  write_summary_json(outdir / "summary.json", sum);
  sum.files.push_back("summary.json");
  return sum;
}

// ---------------------------------------------------------------------------
// check / report
// ---------------------------------------------------------------------------

bool check_run_dir(const std::filesystem::path& run_dir,
                   std::vector<CheckResult>* results) {
  std::ifstream is(run_dir / "summary.json");
  if (!is) throw std::runtime_error("no summary.json in " + run_dir.string());
  json j = json::parse(is);

  std::vector<CheckResult> out;
  bool pass = true;
  for (const auto& c : j.at("checks")) {
    CheckResult r;
    r.name = c.at("name").get<std::string>();
    r.pass = c.at("pass").get<bool>();
    r.hard = c.at("hard").get<bool>();
    r.value = c.at("value").get<double>();
    r.threshold = c.at("threshold").get<double>();
    r.note = c.at("note").get<std::string>();
    if (r.hard && !r.pass) pass = false;
    out.push_back(r);
  }

  // recompute what the stored files allow
  if (std::filesystem::exists(run_dir / "checkpoint" / "manifest.json")) {
    json manifest;
    {
      std::ifstream ms(run_dir / "checkpoint" / "manifest.json");
      manifest = json::parse(ms);
    }
    PressureLaw law = manifest.at("law").get<std::string>() == "infinite"
                          ? PressureLaw::hele_shaw()
                          : PressureLaw::finite(manifest.at("gamma").get<double>());
    Checkpoint cp = read_checkpoint(run_dir / "checkpoint", law);
    double min_rho = 0.0;
    for (const auto& r : cp.state.rho_i) min_rho = std::min(min_rho, r.min_value());
    CheckResult nn{"recheck-nonnegativity", min_rho >= -1e-10, true, min_rho, -1e-10,
                   "recomputed from the stored checkpoint"};
    if (!nn.pass) pass = false;
    out.push_back(nn);
    if (!law.infinite) {
      double defect = 0.0;
      for (std::size_t c = 0; c < cp.state.rho.values.size(); ++c) {
        double want = std::pow(std::max(cp.state.rho.values[c], 0.0), law.gamma);
        defect = std::max(defect, std::abs(cp.state.p.values[c] - want));
      }
      CheckResult pc{"recheck-pressure-consistency", defect <= 1e-12, true, defect,
                     1e-12, "recomputed from the stored checkpoint"};
      if (!pc.pass) pass = false;
      out.push_back(pc);
    }
  }
  if (results != nullptr) *results = out;
  return pass;
}

namespace {

std::map<std::string, double> final_diagnostics_values(const std::filesystem::path& csv) {
  std::map<std::string, double> out;
  std::ifstream is(csv);
  if (!is) return out;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string t, name, value;
    std::getline(ss, t, ',');
    std::getline(ss, name, ',');
    std::getline(ss, value, ',');
    try {
      out[name] = std::stod(value);  // last row per name wins
    } catch (...) {
    }
  }
  return out;
}

}  // namespace

std::string emit_report(const std::filesystem::path& run_dir) {
  std::vector<std::filesystem::path> runs;
  if (std::filesystem::exists(run_dir / "summary.json")) {
    runs.push_back(run_dir);
  } else if (std::filesystem::is_directory(run_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
      if (entry.is_directory() && std::filesystem::exists(entry.path() / "summary.json")) {
        runs.push_back(entry.path());
      }
    }
    std::sort(runs.begin(), runs.end());
  }
  if (runs.empty()) {
    throw std::runtime_error("no completed run found under " + run_dir.string());
  }

  std::ostringstream os;
  for (const auto& dir : runs) {
    std::ifstream is(dir / "summary.json");
    json j = json::parse(is);
    os << "# Run report: " << j.at("scenario").get<std::string>() << "\n\n";
    os << "- directory: " << dir.string() << "\n";
    os << "- config fingerprint: " << j.at("config_fingerprint").get<std::string>()
       << "\n\n";
    os << "## Invariant checks\n\n";
    os << "| check | result | value | threshold |\n";
    os << "|---|---|---|---|\n";
    for (const auto& c : j.at("checks")) {
      char buf[64], buf2[64];
      std::snprintf(buf, sizeof(buf), "%.6g", c.at("value").get<double>());
      std::snprintf(buf2, sizeof(buf2), "%.6g", c.at("threshold").get<double>());
      os << "| " << c.at("name").get<std::string>() << " | "
         << (c.at("pass").get<bool>() ? "pass" : (c.at("hard").get<bool>() ? "FAIL" : "warn"))
         << " | " << buf << " | " << buf2 << " |\n";
    }
    os << "\n## Fitted constants\n\n";
    os << "| constant | value |\n|---|---|\n";
    for (const auto& [key, val] : j.at("constants").items()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.8g", val.get<double>());
      os << "| " << key << " | " << buf << " |\n";
    }
    os << "\n";
  }

  if (runs.size() >= 2) {
    // convergence ratios between the first two runs (coarse listed first)
    auto a = final_diagnostics_values(runs[0] / "diagnostics.csv");
    auto b = final_diagnostics_values(runs[1] / "diagnostics.csv");
    json ja, jb;
    {
      std::ifstream s0(runs[0] / "summary.json"), s1(runs[1] / "summary.json");
      ja = json::parse(s0);
      jb = json::parse(s1);
    }
    os << "## Convergence ratios (" << runs[0].filename().string() << " / "
       << runs[1].filename().string() << ")\n\n";
    os << "| quantity | coarse | fine | ratio |\n|---|---|---|---|\n";
    auto emit_ratio = [&os](const std::string& name, double va, double vb) {
      if (vb == 0.0) return;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "| %s | %.6g | %.6g | %.3f |\n", name.c_str(), va,
                    vb, va / vb);
      os << buf;
    };
    for (const auto& [name, va] : a) {
      auto it = b.find(name);
      if (it != b.end()) emit_ratio(name, va, it->second);
    }
    for (const std::string key :
         {"inversion_residual", "semigroup_residual", "deposit_l1_rel",
          "pushforward_eps"}) {
      if (ja.at("constants").contains(key) && jb.at("constants").contains(key)) {
        emit_ratio(key, ja.at("constants").at(key).get<double>(),
                   jb.at("constants").at(key).get<double>());
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pmflow
