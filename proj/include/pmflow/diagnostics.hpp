#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmflow/flow.hpp"
#include "pmflow/model.hpp"
#include "pmflow/solver.hpp"

namespace pmflow {

enum class WeightRegime { Basic, LogWeighted };

// Pressure weight for the AB-type functional. Basic: omega(a) = a^{1/gamma}/gamma.
// Log-weighted (gamma-uniform): omega(a) = a^{1/gamma} z(a) with
// z(a) = log(1/xi(a))^{lambda'-2}; xi is the identity up to e^-6/2 followed by
// a C1 concave Hermite ramp saturating at e^-6.
struct WeightSpec {
  WeightRegime regime = WeightRegime::Basic;
  double lambda_prime = 0.5;
  double gamma = 2.0;
  bool gamma_infinite = false;
  double p_h = 1.0;
  double w3_constant = 0.0;   // measured witness for (W3)
  std::string w3_zeta;        // the majorant pair's zeta, as a formula string

  double xi(double a) const;
  double xi_prime(double a) const;
  double z(double a) const;
  double z_prime(double a) const;
  double omega(double a) const;
  double omega_prime(double a) const;
};

// Validates (W1) monotone+concave and (W2) omega <= gamma a omega' by dense
// log-spaced sampling on (p_floor, p_h]; throws with the witness point on
// failure. The log-weighted regime is concave only for gamma >= 3 (or the
// incompressible limit), matching its intended use.
WeightSpec build_weight(double lambda_prime, PressureLaw law, WeightRegime regime,
                        double p_h, double p_floor = 1e-30);

struct EntropyMoments {
  double mass = 0.0;
  double second_moment = 0.0;
  double entropy = 0.0;      // int rho log rho
  double dissipation = 0.0;  // int rho |grad p|^2 / (gamma p), p-floored
};

EntropyMoments entropy_and_moments(const SpeciesState& state, double p_floor = 1e-30);

struct DiagnosticsRow {
  double t = 0.0;
  std::string name;
  double value = 0.0;
  double h = 0.0;
  double dt = 0.0;
};

struct ProbeResult {
  double epsilon = 0.0;
  double delta_T = 0.0;
  double delta_2T = 0.0;
  double sup_forward_distance = 0.0;  // sup_(s,t) int rho_bar |X - S|
  double sup_backward_distance = 0.0; // sup int rho_bar |Y - Z|
  double sup_I = 0.0;
  double sup_J = 0.0;
  double i_ratio = 0.0;          // sup_I / (e^{BT} loglog(1/delta_2T)^{1-lambda'})
  double x_dist_scaled = 0.0;    // sup dist * loglog(1/delta_T)^{lambda'/2}
};

struct DiagnosticsReport {
  std::vector<DiagnosticsRow> rows;
  double bound_B = 0.0;
  double p_h = 0.0;
  double gamma = 0.0;
  bool gamma_infinite = false;
  double lambda_prime = 0.5;
  std::vector<ProbeResult> probes;

  void append(double t, const std::string& name, double value, double h, double dt);
  const DiagnosticsRow* find_last(const std::string& name) const;
  std::vector<const DiagnosticsRow*> series(const std::string& name) const;
  void write_csv(const std::filesystem::path& file) const;
  void write_manifest(const std::filesystem::path& file) const;
};

// Feeds every functional of the report during a run: cumulative Q_T integrals
// are advanced on each substep, instantaneous rows appended by sample().
class DiagnosticsAccumulator {
 public:
  DiagnosticsAccumulator(const GrowthModel& model, PressureLaw law,
                         WeightSpec weight, double p_floor, double dt_nominal);

  void accumulate(const SpeciesState& state, double dt);
  void sample(const SpeciesState& state);
  DiagnosticsReport& report() { return report_; }
  const DiagnosticsReport& report() const { return report_; }

  double ab_cumulative() const { return ab_.value(); }
  double hessian_cumulative() const { return hessian_.value(); }
  double weighted_u_cumulative() const { return weighted_u_.value(); }

 private:
  const GrowthModel* model_;
  PressureLaw law_;
  WeightSpec weight_;
  double p_floor_;
  double dt_nominal_;
  DiagnosticsReport report_;
  KahanAccumulator ab_;            // int omega(p) u_+^2
  KahanAccumulator hessian_;       // int p |D2 p|^2
  KahanAccumulator weighted_u_;    // int rho log(1+1/p)^{lambda'-1} |u|
  KahanAccumulator dissipation_;   // int rho |grad p|^2/(gamma p)
  KahanAccumulator rho_grad_sq_;   // int rho |grad p|^2
  KahanAccumulator mass_source_;   // int rho G
};

// Series versions over a recorded history (u recovered from the stored
// trajectory pressure rate): cumulative values at each slice time.
std::vector<DiagnosticsRow> ab_functional(const FieldHistory& history,
                                          const WeightSpec& weight);
std::vector<DiagnosticsRow> weighted_l1_u(const FieldHistory& history,
                                          double lambda_prime, double p_floor = 1e-30);
std::vector<DiagnosticsRow> hessian_functional(const FieldHistory& history);

// Flow-stability probe V = -grad p + epsilon w with mu = rho:
// delta_T = epsilon sqrt(int_QT rho |w|^2), I/J per the doubly-logarithmic
// integrals, distances sup over the sampled (s,t) grid.
ProbeResult evaluate_stability_probe(const FieldHistory& history, const VectorField& w,
                                     double epsilon, double T, double lambda_prime,
                                     double B);

// Worst ratio LHS/RHS of the maximal-function inequality
//   p(x1)|grad p(x1) - grad p(x2)| <= |x1-x2| (f(x1)+f(x2)+g(x1)^2+g(x2)^2)
// over `pairs` seeded random interior point pairs.
double maximal_inequality_worst_ratio(const ScalarField& p, int pairs,
                                      std::uint64_t seed);

}  // namespace pmflow
