#pragma once

#include <functional>
#include <vector>

#include "pmflow/model.hpp"
#include "pmflow/solver.hpp"

namespace pmflow {

struct ObstacleConfig {
  double tol_ob = 1e-9;    // complementarity residual target
  int max_sweeps = 50000;
  double omega_sor = 1.7;  // in [1, 2)

  void validate() const;
};

inline constexpr double kSaturationThreshold = 1.0 - 1e-6;

struct ObstacleResult {
  ScalarField p;
  bool converged = false;
  double residual = 0.0;  // max |min(p, -Lp - G)| over the saturated set
  int sweeps = 0;
};

// Pressure of the incompressible regime: p = 0 off the saturated set
// {rho >= 1 - 1e-6}; on it, the minimizer of int 1/2|grad phi|^2 - phi G over
// phi >= 0 supported on the set, by projected SOR in red-black order.
ObstacleResult solve_complementarity(const ScalarField& rho, const ScalarField& G,
                                     const ObstacleConfig& cfg,
                                     const ScalarField* warm_start = nullptr);

// Discrete obstacle energy int 1/2 |grad p|^2 - p G (for the sweep-monotonicity
// property test).
double obstacle_energy(const ScalarField& p, const ScalarField& G);

// Self-consistent initial pressure: Picard iteration of the obstacle solve
// with G re-evaluated at the latest pressure.
ObstacleResult initial_complementarity_pressure(const SpeciesState& state,
                                                const GrowthModel& model,
                                                const ObstacleConfig& cfg);

struct IncompressibleStepReport {
  bool pressure_converged = true;
  double pressure_residual = 0.0;
  int psor_sweeps = 0;
  int picard_iterations = 0;
  int repair_sweeps = 0;
  double repaired_mass = 0.0;   // total excess moved by saturation repair
  double source_mass = 0.0;
  double max_rho_after = 0.0;
  double min_saturated_drop = 0.0;  // most negative change of rho on the
                                    // previously saturated set (monotone
                                    // saturation check)
};

class HeleShawSolver {
 public:
  HeleShawSolver(GrowthModel model, ObstacleConfig ob, SolverConfig cfg,
                 NutrientParams nutrient = {});

  // Pressure via the obstacle solve (Picard-iterated with G re-evaluated so
  // the complementarity pair is self-consistent), upwind transport with
  // sources, then outward saturation repair preserving fractions.
  IncompressibleStepReport step(SpeciesState& state);
  IncompressibleStepReport step(SpeciesState& state, double dt_step,
                                const std::function<void(const SpeciesState&, double)>& on_substep = {});

  const GrowthModel& model() const { return model_; }
  const ObstacleConfig& obstacle() const { return ob_; }
  const SolverConfig& config() const { return cfg_; }

 private:
  GrowthModel model_;
  ObstacleConfig ob_;
  SolverConfig cfg_;
  NutrientParams nutrient_;

  IncompressibleStepReport step_once(SpeciesState& state, double dt);
};

struct HeleShawRunResult {
  SpeciesState final_state;
  std::vector<SpeciesState> snapshots;
  FieldHistory history;
  std::vector<SeriesPoint> series;
  double source_mass_total = 0.0;
  int total_steps = 0;
  bool any_unconverged = false;
  double worst_saturated_drop = 0.0;
};

HeleShawRunResult run_hele_shaw(HeleShawSolver& solver, SpeciesState initial,
                                double horizon, const RunOptions& opts = {});

struct GammaSweepRow {
  double gamma = 0.0;         // inf encoded as 0 in the CSV, flagged below
  bool is_limit = false;      // the hele-shaw row
  double defect_l1_qt = 0.0;  // |p_gamma (1 - rho_gamma)|_{L1(Q_T)}
  double p_distance_l2 = 0.0;   // final time, vs the hele-shaw run
  double rho_distance_l1 = 0.0;
  double runtime_seconds = 0.0;
};

struct GammaSweepResult {
  std::vector<GammaSweepRow> rows;
  SpeciesState limit_final;
};

// Runs the finite-gamma solver from rho0_gamma = (p0)^{1/gamma},
// rho0_{i,gamma} = rho0_gamma * (rho_i0/rho0), against the hele-shaw run from
// (rho_i0, n0). p0 must be the complementarity pressure of the initial state.
GammaSweepResult gamma_sweep(const std::vector<ScalarField>& rho_i0,
                             const ScalarField& n0, const ScalarField& p0,
                             const GrowthModel& model,
                             const std::vector<double>& gammas, double horizon,
                             const SolverConfig& cfg, const ObstacleConfig& ob,
                             const NutrientParams& nutrient = {});

}  // namespace pmflow
