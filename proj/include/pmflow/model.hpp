#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmflow/grid.hpp"

namespace pmflow {

// Constitutive law p = rho^gamma, or the incompressible pair
// p(1-rho) = 0, rho <= 1 when infinite is set.
struct PressureLaw {
  double gamma = 2.0;
  bool infinite = false;

  static PressureLaw finite(double g);
  static PressureLaw hele_shaw();

  double energy_density(double rho) const;  // rho^{gamma+1}/(gamma+1)
  std::string label() const;
};

// One species' growth rate G_i(p, n) with partial-derivative evaluators.
struct GrowthFunction {
  std::function<double(double, double)> g;
  std::function<double(double, double)> dp;
  std::function<double(double, double)> dn;
  std::string description;
};

struct GrowthModel {
  std::vector<GrowthFunction> species;
  double p_h = 1.0;       // homeostatic pressure (G2)
  double bound = 1.0;     // B = max_i sup |G_i|
  bool g1 = true, g2 = true, g3 = true, g4 = false;  // declared assumption flags

  std::size_t count() const { return species.size(); }
  double growth(std::size_t i, double p, double n) const { return species[i].g(p, n); }
  double growth_dp(std::size_t i, double p, double n) const { return species[i].dp(p, n); }
  double growth_dn(std::size_t i, double p, double n) const { return species[i].dn(p, n); }
};

// Built-in presets named in scenario configs.
GrowthModel growth_linear_homeostatic(std::size_t species, double g0, double p_h);
GrowthModel growth_nutrient_gated(std::size_t species, double g0, double delta, double p_h);
GrowthModel growth_constant(const std::vector<double>& rates, double p_h);
// User model from the (p, n) expression language; derivatives by central
// differences (assumption validation is sampling-based either way).
GrowthModel growth_from_expressions(const std::vector<std::string>& exprs, double p_h);

struct AssumptionCheck {
  std::string name;
  bool declared = false;
  bool holds = true;
  double worst_value = 0.0;
  double witness_p = 0.0;
  double witness_n = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  double measured_bound = 0.0;  // max sampled |G_i|
  bool declared_hold() const;
  const AssumptionCheck& get(const std::string& name) const;
};

// Samples G_i on [0, p_max] x [0, n_max]; throws on non-finite growth values.
// (G4) evaluates 1/2 G_i - p dG_i/dp at every sample point.
AssumptionReport validate_assumptions(const GrowthModel& model, double p_max,
                                      double n_max, int samples_per_axis = 64);

// Full solution tuple at one time. rho is maintained as the exact per-cell
// sum of the rho_i; for finite gamma p equals rho^gamma by construction.
struct SpeciesState {
  double t = 0.0;
  PressureLaw law;
  std::vector<ScalarField> rho_i;
  ScalarField rho;
  ScalarField p;
  ScalarField n;

  static constexpr double kVacuumRel = 1e-10;

  std::size_t species_count() const { return rho_i.size(); }
  const GridSpec& grid() const { return rho.grid; }
  double vacuum_threshold() const { return kVacuumRel * rho.max_value(); }

  void recompute_totals();         // rho := sum rho_i (exact per-cell sums)
  void sync_pressure();            // p := rho^gamma (finite laws only)
  // Fractions c_i; 1/l in vacuum so they always sum to one.
  std::vector<ScalarField> fractions() const;

  struct InvariantReport {
    bool nonnegative = true;
    double min_rho = 0.0;
    bool fractions_ok = true;
    double max_fraction_defect = 0.0;
    bool pressure_consistent = true;
    double pressure_defect = 0.0;
    bool max_principle_ok = true;
    double max_pressure = 0.0;
    int support_buffer = 0;
    bool buffer_ok = true;
  };
  InvariantReport check_invariants(const GrowthModel& model) const;
};

SpeciesState make_species_state(const std::vector<ScalarField>& rho_i0,
                                const ScalarField& n0, PressureLaw law);

// Pointwise rho^gamma. Throws for the incompressible law (use
// solve_complementarity instead).
ScalarField pressure_from_density(const ScalarField& rho, const PressureLaw& law);

// G = sum_i c_i G_i(p, n); equal-weight convention in vacuum (the value there
// never feeds the dynamics since every use is multiplied by rho or p).
ScalarField total_growth(const SpeciesState& state, const GrowthModel& model);

// u = -gamma (lap p + G); finite laws only.
ScalarField u_field(const SpeciesState& state, const GrowthModel& model);

}  // namespace pmflow
