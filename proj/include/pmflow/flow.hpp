#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <vector>

#include "pmflow/model.hpp"
#include "pmflow/solver.hpp"

namespace pmflow {

// Velocity field driving a flow map; the solver's own -grad p or a probe
// perturbation of it. Implementations must be pure (thread-safe reads).
class VelocitySource {
 public:
  virtual ~VelocitySource() = default;
  virtual std::array<double, 2> velocity(double t, std::array<double, 2> x) const = 0;
  virtual double max_speed() const = 0;
};

class HistoryVelocity : public VelocitySource {
 public:
  explicit HistoryVelocity(const FieldHistory& h) : history_(&h) {}
  std::array<double, 2> velocity(double t, std::array<double, 2> x) const override {
    return history_->velocity(t, x);
  }
  double max_speed() const override { return history_->max_speed(); }

 private:
  const FieldHistory* history_;
};

// -grad p + epsilon * w for a fixed static field w.
class PerturbedVelocity : public VelocitySource {
 public:
  PerturbedVelocity(const FieldHistory& h, const VectorField& w, double epsilon)
      : history_(&h), w_(&w), epsilon_(epsilon) {}
  std::array<double, 2> velocity(double t, std::array<double, 2> x) const override;
  double max_speed() const override;

 private:
  const FieldHistory* history_;
  const VectorField* w_;
  double epsilon_;
};

// Particles seeded at cell centers where rho(s) exceeds the vacuum threshold,
// weight rho(s, x_j) h^d. Carried values: per-species growth integrals
// int G_i(X) dtau and the trajectory pressure ledger int (gamma p (lap p + G))(X).
struct ParticleEnsemble {
  double s = 0.0;        // base time
  double t_now = 0.0;    // current time of the positions
  GridSpec seed_grid;
  std::vector<std::array<double, 2>> seeds;
  std::vector<std::array<double, 2>> pos;
  std::vector<double> w;                       // rho(s) h^d
  std::vector<std::vector<double>> w_species;  // rho_i(s) h^d per species
  std::vector<std::vector<double>> growth_int; // per species, per particle
  std::vector<double> p_start;                 // p(s, x_j)
  std::vector<double> p_ledger;                // int (gamma p (lap p + G)) o X

  std::size_t size() const { return pos.size(); }
  double total_weight() const;
};

ParticleEnsemble seed_ensemble(const SpeciesState& state, double threshold_rel =
                                   SpeciesState::kVacuumRel);
// Seed with externally supplied weights (e.g. rho_bar = min(rho, mu)).
ParticleEnsemble seed_ensemble_weighted(const ScalarField& weight_field, double s,
                                        double threshold_rel = SpeciesState::kVacuumRel);

enum class FlowDirection { Forward, Backward };

struct FlowMapRecord {
  FlowDirection direction = FlowDirection::Forward;
  double s = 0.0;  // base time
  double t = 0.0;  // duration
  double particle_dt = 0.0;
  ParticleEnsemble ensemble;
};

struct FlowAdvanceOptions {
  double cfl = 0.5;
  // model for the carried growth integrals; null skips them
  const GrowthModel* model = nullptr;
  const FieldHistory* history = nullptr;  // for p, n along trajectories
  const PressureLaw* law = nullptr;       // for the trajectory pressure ledger
};

// Midpoint RK2 along the source; particle dt = min(solver slice spacing,
// cfl*h/max speed). Throws if a particle leaves the truncated domain.
FlowMapRecord advance_forward(const ParticleEnsemble& ens, const VelocitySource& vel,
                              double duration, const FlowAdvanceOptions& opts = {});
FlowMapRecord advance_backward(const ParticleEnsemble& ens, const VelocitySource& vel,
                               double duration, const FlowAdvanceOptions& opts = {});

// Mass-conservative cloud-in-cell deposition of the particle weights.
ScalarField deposit(const ParticleEnsemble& ens, const GridSpec& grid);
// Deposits w_i exp(int G_i) per Eq.-style species representation.
ScalarField deposit_species(const ParticleEnsemble& ens, std::size_t species,
                            const GridSpec& grid);

// sum_j w_{i,j} phi(X_j) exp(int G_i o X dtau)
double reconstruct_species(const ParticleEnsemble& ens, std::size_t species,
                           const std::function<double(std::array<double, 2>)>& phi);

struct ResidualReport {
  double weighted_l1 = 0.0;  // int rho_bar |residual|
  double total_weight = 0.0;
  double h = 0.0;
  double dt = 0.0;
  std::size_t particles_used = 0;
  std::size_t particles_skipped = 0;  // outside the interpolable map support
};

// X(t, s, Y(t, s+t, x)) - x in the weighted L1 norm of the Y ensemble.
ResidualReport check_inversion(const FlowMapRecord& forward,
                               const FlowMapRecord& backward);

// X(t,s,x) vs X(t-t', s+t', X(t',s,x)).
ResidualReport check_semigroup(const FlowMapRecord& direct,
                               const FlowMapRecord& first_leg,
                               const FlowMapRecord& second_leg);

// M_ij = int min(rho_i, rho_j), i != j.
std::vector<std::vector<double>> mixing_metric(const SpeciesState& state);

void export_trajectories(const std::filesystem::path& csv,
                         const std::vector<FlowMapRecord>& records);

}  // namespace pmflow
