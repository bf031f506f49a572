#include "pmflow/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmflow/expr.hpp"
#include "pmflow/operators.hpp"

namespace pmflow {

PressureLaw PressureLaw::finite(double g) {
  if (!(g >= 1.0)) throw std::invalid_argument("pressure law requires gamma >= 1");
  PressureLaw law;
  law.gamma = g;
  law.infinite = false;
  return law;
}

PressureLaw PressureLaw::hele_shaw() {
  PressureLaw law;
  law.gamma = std::numeric_limits<double>::infinity();
  law.infinite = true;
  return law;
}

double PressureLaw::energy_density(double rho) const {
  if (infinite) return rho <= 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::pow(rho, gamma + 1.0) / (gamma + 1.0);
}

std::string PressureLaw::label() const {
  return infinite ? "infinite" : std::to_string(gamma);
}

GrowthModel growth_linear_homeostatic(std::size_t species, double g0, double p_h) {
  GrowthModel m;
  m.p_h = p_h;
  for (std::size_t i = 0; i < species; ++i) {
    GrowthFunction f;
    f.g = [g0, p_h](double p, double) { return g0 * (1.0 - p / p_h); };
    f.dp = [g0, p_h](double, double) { return -g0 / p_h; };
    f.dn = [](double, double) { return 0.0; };
    f.description = "linear-homeostatic";
    m.species.push_back(std::move(f));
  }
  // |G| on p in [0, p_h + 1]: largest at the sampling edge
  m.bound = std::abs(g0) * (1.0 + 1.0 / p_h);
  m.g1 = m.g2 = m.g3 = true;
  m.g4 = g0 > 0.0;
  return m;
}

GrowthModel growth_nutrient_gated(std::size_t species, double g0, double delta,
                                  double p_h) {
  GrowthModel m;
  m.p_h = p_h;
  for (std::size_t i = 0; i < species; ++i) {
    GrowthFunction f;
    f.g = [g0, delta, p_h](double p, double n) {
      return g0 * n / (1.0 + n) - delta * p / p_h;
    };
    f.dp = [delta, p_h](double, double) { return -delta / p_h; };
    f.dn = [g0](double, double n) { return g0 / ((1.0 + n) * (1.0 + n)); };
    f.description = "nutrient-gated";
    m.species.push_back(std::move(f));
  }
  m.bound = std::abs(g0) + std::abs(delta) * (1.0 + 1.0 / p_h);
  m.g1 = m.g3 = true;
  m.g2 = delta > g0;  // G < 0 for p > p_h needs delta (p/p_h) > g0 n/(1+n)
  m.g4 = false;       // G(0,0) = 0, the (G4) infimum is not positive
  return m;
}

GrowthModel growth_constant(const std::vector<double>& rates, double p_h) {
  GrowthModel m;
  m.p_h = p_h;
  double b = 0.0;
  for (double r : rates) {
    GrowthFunction f;
    f.g = [r](double, double) { return r; };
    f.dp = [](double, double) { return 0.0; };
    f.dn = [](double, double) { return 0.0; };
    f.description = "constant";
    m.species.push_back(std::move(f));
    b = std::max(b, std::abs(r));
  }
  m.bound = b;
  m.g1 = m.g3 = true;
  bool all_negative = true, all_positive = true;
  for (double r : rates) {
    all_negative = all_negative && r < 0.0;
    all_positive = all_positive && r > 0.0;
  }
  m.g2 = all_negative;
  m.g4 = all_positive;
  return m;
}

GrowthModel growth_from_expressions(const std::vector<std::string>& exprs, double p_h) {
  GrowthModel m;
  m.p_h = p_h;
  for (const std::string& text : exprs) {
    Expression e = Expression::parse(text);
    GrowthFunction f;
    f.g = [e](double p, double n) { return e.eval(p, n); };
    f.dp = [e](double p, double n) {
      double h = 1e-6 * std::max(1.0, std::abs(p));
      return (e.eval(p + h, n) - e.eval(std::max(0.0, p - h), n)) /
             (h + std::min(p, h));
    };
    f.dn = [e](double p, double n) {
      double h = 1e-6 * std::max(1.0, std::abs(n));
      return (e.eval(p, n + h) - e.eval(p, std::max(0.0, n - h))) /
             (h + std::min(n, h));
    };
    f.description = "expr: " + text;
    m.species.push_back(std::move(f));
  }
  m.bound = 0.0;  // measured by validate_assumptions
  m.g1 = m.g2 = m.g3 = m.g4 = false;
  return m;
}

bool AssumptionReport::declared_hold() const {
  for (const auto& c : checks) {
    if (c.declared && !c.holds) return false;
  }
  return true;
}

const AssumptionCheck& AssumptionReport::get(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no assumption check named " + name);
}

AssumptionReport validate_assumptions(const GrowthModel& model, double p_max,
                                      double n_max, int samples_per_axis) {
  if (model.species.empty()) {
    throw std::invalid_argument("growth model has no species");
  }
  const int ns = std::max(2, samples_per_axis);
  AssumptionReport report;
  AssumptionCheck g1{"G1", model.g1, true, 0.0, 0.0, 0.0, "max sampled |G_i|"};
  AssumptionCheck g2{"G2", model.g2, true, 0.0, 0.0, 0.0,
                     "G_i < 0 for sampled p > p_h"};
  AssumptionCheck g3{"G3", model.g3, true, 0.0, 0.0, 0.0,
                     "max (p dG/dp)_+ + |dG/dn| on sampled rectangle"};
  AssumptionCheck g4{"G4", model.g4, true,
                     std::numeric_limits<double>::infinity(), 0.0, 0.0,
                     "min 1/2 G_i - p dG_i/dp"};

  for (std::size_t s = 0; s < model.species.size(); ++s) {
    for (int jp = 0; jp < ns; ++jp) {
      double p = p_max * static_cast<double>(jp) / (ns - 1);
      for (int jn = 0; jn < ns; ++jn) {
        double n = n_max * static_cast<double>(jn) / (ns - 1);
        double g = model.growth(s, p, n);
        if (!std::isfinite(g)) {
          throw std::runtime_error("model invalid: non-finite growth value at p=" +
                                   std::to_string(p) + " n=" + std::to_string(n));
        }
        if (std::abs(g) > g1.worst_value) {
          g1.worst_value = std::abs(g);
          g1.witness_p = p;
          g1.witness_n = n;
        }
        if (p > model.p_h && g >= 0.0) {
          g2.holds = false;
          g2.worst_value = std::max(g2.worst_value, g);
          g2.witness_p = p;
          g2.witness_n = n;
        }
        double dp = model.growth_dp(s, p, n);
        double dn = model.growth_dn(s, p, n);
        double g3v = std::max(p * dp, 0.0) + std::abs(dn);
        if (!std::isfinite(g3v)) g3.holds = false;
        if (g3v > g3.worst_value) {
          g3.worst_value = g3v;
          g3.witness_p = p;
          g3.witness_n = n;
        }
        double g4v = 0.5 * g - p * dp;
        if (g4v < g4.worst_value) {
          g4.worst_value = g4v;
          g4.witness_p = p;
          g4.witness_n = n;
        }
      }
    }
  }
  g4.holds = g4.worst_value > 0.0;
  report.measured_bound = g1.worst_value;
  report.checks = {g1, g2, g3, g4};
  return report;
}

void SpeciesState::recompute_totals() {
  for (std::size_t c = 0; c < rho.values.size(); ++c) {
    double s = 0.0;
    for (const auto& r : rho_i) s += r.values[c];
    rho.values[c] = s;
  }
  rho.time = t;
}

void SpeciesState::sync_pressure() {
  p = pressure_from_density(rho, law);
  p.time = t;
}

std::vector<ScalarField> SpeciesState::fractions() const {
  const double thr = vacuum_threshold();
  const double uniform = 1.0 / static_cast<double>(rho_i.size());
  std::vector<ScalarField> out;
  out.reserve(rho_i.size());
  for (std::size_t s = 0; s < rho_i.size(); ++s) {
    ScalarField c(grid(), uniform, "c_" + std::to_string(s));
    c.time = t;
    for (std::size_t idx = 0; idx < c.values.size(); ++idx) {
      if (rho.values[idx] > thr) c.values[idx] = rho_i[s].values[idx] / rho.values[idx];
    }
    out.push_back(std::move(c));
  }
  return out;
}

SpeciesState::InvariantReport SpeciesState::check_invariants(
    const GrowthModel& model) const {
  InvariantReport rep;
  rep.min_rho = 0.0;
  for (const auto& r : rho_i) rep.min_rho = std::min(rep.min_rho, r.min_value());
  rep.nonnegative = rep.min_rho >= ScalarField::kDensityFloor;

  const double thr = std::max(vacuum_threshold(), 1e-10);
  auto cs = fractions();
  for (std::size_t idx = 0; idx < rho.values.size(); ++idx) {
    if (rho.values[idx] <= thr) continue;
    double s = 0.0;
    for (const auto& c : cs) s += c.values[idx];
    rep.max_fraction_defect = std::max(rep.max_fraction_defect, std::abs(s - 1.0));
  }
  rep.fractions_ok = rep.max_fraction_defect <= 1e-8;

  rep.max_pressure = p.max_value();
  rep.max_principle_ok = !model.g2 || rep.max_pressure <= model.p_h * (1.0 + 1e-6);

  if (!law.infinite) {
    double defect = 0.0;
    for (std::size_t idx = 0; idx < rho.values.size(); ++idx) {
      double want = std::pow(std::max(rho.values[idx], 0.0), law.gamma);
      defect = std::max(defect, std::abs(p.values[idx] - want));
    }
    rep.pressure_defect = defect;
    rep.pressure_consistent = defect <= 1e-12;
  }

  if (grid().boundary == BoundaryMode::TruncatedBuffer) {
    rep.support_buffer = support_buffer_cells(rho, thr);
    rep.buffer_ok = rep.support_buffer >= 4;
  } else {
    rep.support_buffer = std::numeric_limits<int>::max();
  }
  return rep;
}

SpeciesState make_species_state(const std::vector<ScalarField>& rho_i0,
                                const ScalarField& n0, PressureLaw law) {
  if (rho_i0.empty()) throw std::invalid_argument("need at least one species");
  SpeciesState st;
  st.law = law;
  st.t = rho_i0.front().time;
  st.rho_i = rho_i0;
  st.rho = ScalarField(rho_i0.front().grid, 0.0, "rho");
  st.n = n0;
  st.recompute_totals();
  if (!law.infinite) {
    st.sync_pressure();
  } else {
    st.p = ScalarField(st.grid(), 0.0, "p");
  }
  return st;
}

ScalarField pressure_from_density(const ScalarField& rho, const PressureLaw& law) {
  if (law.infinite) {
    throw std::invalid_argument(
        "unsupported law: p = rho^gamma undefined for the incompressible limit; "
        "use solve_complementarity");
  }
  ScalarField p(rho.grid, 0.0, "p");
  p.time = rho.time;
  for (std::size_t c = 0; c < rho.values.size(); ++c) {
    double r = rho.values[c] > 0.0 ? rho.values[c] : 0.0;
    p.values[c] = std::pow(r, law.gamma);
  }
  return p;
}

ScalarField total_growth(const SpeciesState& state, const GrowthModel& model) {
  if (model.count() != state.species_count()) {
    throw std::invalid_argument("growth model / state species count mismatch");
  }
  const double thr = state.vacuum_threshold();
  const double uniform = 1.0 / static_cast<double>(model.count());
  ScalarField G(state.grid(), 0.0, "G");
  G.time = state.t;
  for (std::size_t c = 0; c < G.values.size(); ++c) {
    double pv = state.p.values[c] > 0.0 ? state.p.values[c] : 0.0;
    double nv = state.n.values[c] > 0.0 ? state.n.values[c] : 0.0;
    double total = state.rho.values[c];
    double acc = 0.0;
    for (std::size_t s = 0; s < model.count(); ++s) {
      double ci = total > thr ? state.rho_i[s].values[c] / total : uniform;
      acc += ci * model.growth(s, pv, nv);
    }
    G.values[c] = acc;
  }
  return G;
}

ScalarField u_field(const SpeciesState& state, const GrowthModel& model) {
  if (state.law.infinite) {
    throw std::invalid_argument("u_field requires a finite pressure law");
  }
  ScalarField lap = laplacian(state.p);
  ScalarField G = total_growth(state, model);
  ScalarField u(state.grid(), 0.0, "u");
  u.time = state.t;
  for (std::size_t c = 0; c < u.values.size(); ++c) {
    u.values[c] = -state.law.gamma * (lap.values[c] + G.values[c]);
  }
  return u;
}

}  // namespace pmflow
