#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmflow/determinism.hpp"
#include "pmflow/model.hpp"

namespace pmflow {

struct SolverConfig {
  double dt = 0.01;          // requested step; sub-cycled when CFL demands it
  double cfl = 0.5;          // effective dt <= cfl * h / max(|grad p|, eps)
  double tol_fp = 1e-7;      // fixed-point stop: |p_{m+1} - p_m|_inf
  int max_fp = 2000;         // iteration cap (>= 2); exceeding flags the step
  double eps_min = 1e-8;     // floor for the regularization eps_m = 1/m
  double tol_lin = 1e-11;    // relative CG tolerance
  int max_lin = 4000;
  double resync_weight = 0.5;  // omega_r of the rho <- p^{1/gamma} projection

  void validate() const;
};

struct NutrientParams {
  bool enabled = false;
  double alpha = 1.0;              // diffusion rate
  std::vector<double> beta;        // consumption rate per species
};

struct MollifierSpec {
  int k = 1;  // floor amplitude 1/k, mollifier width 1/k
};

// Gaussian floor (1/k) e^{-|x|^2} per species plus convolution with a
// compactly supported bump of width 1/k; the nutrient is convolved only.
// Sets *width_below_grid when 1/k < h (convolution degenerates to identity).
SpeciesState mollify_initial_data(const std::vector<ScalarField>& rho_i0,
                                  const ScalarField& n0, const MollifierSpec& spec,
                                  PressureLaw law,
                                  bool* width_below_grid = nullptr);

struct StepReport {
  int subcycles = 0;
  int fp_iterations = 0;     // total across subcycles
  bool fp_converged = true;  // false if any subcycle hit max_fp
  double fp_residual = 0.0;  // worst final |p_{m+1} - p_m|_inf
  double max_pressure = 0.0;
  double source_mass = 0.0;  // discrete sum_i int rho_i G_i dt of this step
  bool buffer_warning = false;
};

// Conservative first-order upwind transport of each rho_i along -grad(p_drive)
// plus the explicit source rho_i G_i(p_source, n_source); flux form, so total
// mass changes only through the source term (returned via source_mass).
void transport_species(std::vector<ScalarField>& rho_i, const ScalarField& p_drive,
                       double dt, const GrowthModel* model,
                       const ScalarField* p_source, const ScalarField* n_source,
                       KahanAccumulator* source_mass);
// Buffer-reusing form: rho_out gets the transported rho_in.
void transport_species(const std::vector<ScalarField>& rho_in,
                       std::vector<ScalarField>& rho_out, const ScalarField& p_drive,
                       double dt, const GrowthModel* model,
                       const ScalarField* p_source, const ScalarField* n_source,
                       KahanAccumulator* source_mass);

// CG for (diag(1/D) - dt*L) x = rhs/D, i.e. the symmetrized form of
// (I - dt*D*L) x = rhs with cell-wise coefficient D > 0. Returns iterations.
int solve_diffusion_implicit(const ScalarField& coeff_D, double dt,
                             const ScalarField& rhs, ScalarField& x, double tol,
                             int max_iter);

// Backward-Euler diffusion with explicit consumption -n sum_i beta_i rho_i.
ScalarField advance_nutrient_implicit(const ScalarField& n_old,
                                      const std::vector<ScalarField>& rho_i,
                                      const NutrientParams& nutrient, double dt,
                                      double tol_lin, int max_lin);

class PmeSolver {
 public:
  PmeSolver(GrowthModel model, PressureLaw law, SolverConfig cfg,
            NutrientParams nutrient = {});

  // Advance by cfg.dt (internally sub-cycled). Throws on scheme failure
  // (densities below -1e-10); fixed-point non-convergence only flags.
  StepReport step(SpeciesState& state);
  StepReport step(SpeciesState& state, double dt_step,
                  const std::function<void(const SpeciesState&, double)>& on_substep = {});

  // One sub-step of size dt: the per-step fixed-point loop (a)-(d) plus the
  // under-relaxed rho/p resync.
  StepReport step_once(SpeciesState& state, double dt);

  const GrowthModel& model() const { return model_; }
  const PressureLaw& law() const { return law_; }
  const SolverConfig& config() const { return cfg_; }
  const NutrientParams& nutrient() const { return nutrient_; }

 private:
  GrowthModel model_;
  PressureLaw law_;
  SolverConfig cfg_;
  NutrientParams nutrient_;

  ScalarField advance_nutrient(const ScalarField& n_old,
                               const std::vector<ScalarField>& rho_i, double dt);
  friend class HeleShawSolver;
};

// Time-indexed record of (p, n, rho, -grad p) used by the Lagrangian flow
// module; linear interpolation in time between slices. When recorded with a
// growth model under a finite law, also carries the trajectory pressure rate
// gamma p (lap p + G) = d/dt (p o X).
struct FieldSlice {
  double t = 0.0;
  ScalarField p, n, rho;
  VectorField vel;  // -grad p
  ScalarField p_rate;
};

class FieldHistory {
 public:
  void record(const SpeciesState& state, const GrowthModel* model = nullptr);
  bool empty() const { return slices_.empty(); }
  std::size_t size() const { return slices_.size(); }
  const FieldSlice& slice(std::size_t i) const { return slices_[i]; }
  double t_front() const { return slices_.front().t; }
  double t_back() const { return slices_.back().t; }

  std::array<double, 2> velocity(double t, std::array<double, 2> x) const;
  double pressure(double t, std::array<double, 2> x) const;
  double nutrient(double t, std::array<double, 2> x) const;
  double pressure_rate(double t, std::array<double, 2> x) const;
  double grid_spacing_min() const;
  double min_slice_gap() const;
  double max_speed() const;

 private:
  std::vector<FieldSlice> slices_;
  // (index, weight) of the slice pair bracketing t
  std::pair<std::size_t, double> locate(double t) const;
};

struct RunOptions {
  std::vector<double> sample_times;  // absolute times for full snapshots
  int history_stride = 1;            // record every k-th substep into history
  bool record_history = true;
  std::function<void(const SpeciesState&, double dt_sub)> on_substep;
};

struct SeriesPoint {
  double t = 0.0;
  double mass = 0.0;
  double max_p = 0.0;
  double min_rho = 0.0;
  double support_radius = 0.0;
};

struct RunResult {
  SpeciesState final_state;
  std::vector<SpeciesState> snapshots;
  FieldHistory history;
  std::vector<SeriesPoint> series;  // one entry per substep, plus t0
  double source_mass_total = 0.0;
  int total_steps = 0;
  int total_fp_iterations = 0;
  bool any_fp_unconverged = false;
  bool buffer_warning = false;
};

// Advances to t0 + horizon. horizon == 0 yields only the initial snapshot.
RunResult run_pme(PmeSolver& solver, SpeciesState initial, double horizon,
                  const RunOptions& opts = {});

// Checkpoint = field snapshot files + manifest.json (config hash, time and
// accumulators as hex-exact doubles, step index). Restart is bit-reproducible.
void write_checkpoint(const std::filesystem::path& dir, const SpeciesState& state,
                      int step_index, const std::string& config_fingerprint,
                      double source_mass_total);
struct Checkpoint {
  SpeciesState state;
  int step_index = 0;
  std::string config_fingerprint;
  double source_mass_total = 0.0;
};
Checkpoint read_checkpoint(const std::filesystem::path& dir, PressureLaw law);

}  // namespace pmflow
