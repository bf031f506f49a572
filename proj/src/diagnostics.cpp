#include "pmflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "pmflow/operators.hpp"

namespace pmflow {

using nlohmann::json;

namespace {
constexpr double kXiCap = 2.4787521766663585e-3;  // e^-6
}

double WeightSpec::xi(double a) const {
  const double x0 = 0.5 * kXiCap;
  const double L = kXiCap;
  if (a <= x0) return a;
  if (a >= x0 + L) return kXiCap;
  double u = a - x0;
  return x0 + u - u * u / (2.0 * L);
}

double WeightSpec::xi_prime(double a) const {
  const double x0 = 0.5 * kXiCap;
  const double L = kXiCap;
  if (a <= x0) return 1.0;
  if (a >= x0 + L) return 0.0;
  return 1.0 - (a - x0) / L;
}

double WeightSpec::z(double a) const {
  if (a <= 0.0) return 0.0;
  double lg = -std::log(xi(a));
  return std::pow(lg, lambda_prime - 2.0);
}

double WeightSpec::z_prime(double a) const {
  if (a <= 0.0) return 0.0;
  double xv = xi(a);
  double lg = -std::log(xv);
  return (2.0 - lambda_prime) * std::pow(lg, lambda_prime - 3.0) * xi_prime(a) / xv;
}

double WeightSpec::omega(double a) const {
  if (a <= 0.0) return 0.0;
  if (regime == WeightRegime::Basic) {
    return std::pow(a, 1.0 / gamma) / gamma;
  }
  double power = gamma_infinite ? 1.0 : std::pow(a, 1.0 / gamma);
  return power * z(a);
}

double WeightSpec::omega_prime(double a) const {
  if (a <= 0.0) return 0.0;
  if (regime == WeightRegime::Basic) {
    return std::pow(a, 1.0 / gamma - 1.0) / (gamma * gamma);
  }
  if (gamma_infinite) return z_prime(a);
  double inv_g = 1.0 / gamma;
  return inv_g * std::pow(a, inv_g - 1.0) * z(a) + std::pow(a, inv_g) * z_prime(a);
}

WeightSpec build_weight(double lambda_prime, PressureLaw law, WeightRegime regime,
                        double p_h, double p_floor) {
  if (!(lambda_prime > 0.0 && lambda_prime <= 1.0)) {
    throw std::invalid_argument("lambda' must lie in (0, 1]");
  }
  WeightSpec w;
  w.regime = law.infinite ? WeightRegime::LogWeighted : regime;
  w.lambda_prime = lambda_prime;
  w.gamma_infinite = law.infinite;
  w.gamma = law.infinite ? std::numeric_limits<double>::infinity() : law.gamma;
  w.p_h = p_h;

  // dense log-spaced sampling of (W1), concavity, and (W2)
  const int ns = 1000;
  const double lo = std::max(p_floor, 1e-30);
  const double hi = p_h;
  double prev_a = 0.0, prev_omega = 0.0, prev_slope = -1.0;
  bool have_prev = false, have_slope = false;
  double w3c = 0.0;
  for (int k = 0; k <= ns; ++k) {
    double a = lo * std::pow(hi / lo, static_cast<double>(k) / ns);
    double om = w.omega(a);
    if (!(om >= 0.0)) {
      throw std::runtime_error("weight validation failed (W1 nonnegativity) at a=" +
                               std::to_string(a));
    }
    if (have_prev) {
      if (om < prev_omega * (1.0 - 1e-12) - 1e-300) {
        throw std::runtime_error("weight validation failed (W1 monotone) at a=" +
                                 std::to_string(a));
      }
      double slope = (om - prev_omega) / (a - prev_a);
      if (have_slope && slope > prev_slope * (1.0 + 1e-6) + 1e-300) {
        throw std::runtime_error("weight validation failed (W1 concavity) at a=" +
                                 std::to_string(a));
      }
      prev_slope = slope;
      have_slope = true;
    }
    if (!w.gamma_infinite) {
      double rhs = w.gamma * a * w.omega_prime(a);
      if (om > rhs * (1.0 + 0.01) + 1e-300) {
        throw std::runtime_error("weight validation failed (W2) at a=" +
                                 std::to_string(a));
      }
    } else if (w.z_prime(a) < 0.0) {
      throw std::runtime_error("weight validation failed (W2, z monotone) at a=" +
                               std::to_string(a));
    }
    // (W3) witness: omega(a) <= C a^{1/gamma} max(1/gamma, a zeta'(a)) with
    // zeta = log(1/xi)^{lambda'-1} (log-weighted) or zeta = id (basic)
    double power = w.gamma_infinite ? 1.0 : std::pow(a, 1.0 / w.gamma);
    double zeta_p;
    if (w.regime == WeightRegime::Basic) {
      zeta_p = 1.0;
    } else {
      double xv = w.xi(a);
      zeta_p = (1.0 - lambda_prime) * std::pow(-std::log(xv), lambda_prime - 2.0) *
               w.xi_prime(a) / xv;
    }
    double major = power * std::max(w.gamma_infinite ? 0.0 : 1.0 / w.gamma,
                                    a * zeta_p);
    if (major > 0.0) w3c = std::max(w3c, om / major);
    prev_a = a;
    prev_omega = om;
    have_prev = true;
  }
  w.w3_constant = w3c;
  w.w3_zeta = w.regime == WeightRegime::Basic ? "zeta(a) = a"
                                              : "zeta(a) = log(1/xi(a))^(lambda'-1)";
  return w;
}

EntropyMoments entropy_and_moments(const SpeciesState& state, double p_floor) {
  const GridSpec& g = state.grid();
  const double vol = g.cell_volume();
  VectorField grad = gradient(state.p);
  const double gamma = state.law.infinite ? 1.0 : state.law.gamma;
  KahanAccumulator mass, moment, entropy, dissipation;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      std::size_t c = g.index(i, j);
      double r = state.rho.values[c] > 0.0 ? state.rho.values[c] : 0.0;
      mass.add(r);
      double x = g.center(0, i);
      double r2 = x * x;
      if (g.dim == 2) {
        double y = g.center(1, j);
        r2 += y * y;
      }
      moment.add(r2 * r);
      if (r > 0.0) entropy.add(r * std::log(r));
      double gx = grad.comp[0][c];
      double gy = grad.comp[1][c];
      double pv = std::max(state.p.values[c], p_floor);
      dissipation.add(r * (gx * gx + gy * gy) / (gamma * pv));
    }
  }
  EntropyMoments out;
  out.mass = mass.value() * vol;
  out.second_moment = moment.value() * vol;
  out.entropy = entropy.value() * vol;
  out.dissipation = dissipation.value() * vol;
  return out;
}

void DiagnosticsReport::append(double t, const std::string& name, double value,
                               double h, double dt) {
  rows.push_back({t, name, value, h, dt});
}

const DiagnosticsRow* DiagnosticsReport::find_last(const std::string& name) const {
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    if (it->name == name) return &*it;
  }
  return nullptr;
}

std::vector<const DiagnosticsRow*> DiagnosticsReport::series(
    const std::string& name) const {
  std::vector<const DiagnosticsRow*> out;
  for (const auto& r : rows) {
    if (r.name == name) out.push_back(&r);
  }
  return out;
}

void DiagnosticsReport::write_csv(const std::filesystem::path& file) const {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file.string());
  os << "t,functional,value,h,dt\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g\n", r.t,
                  r.name.c_str(), r.value, r.h, r.dt);
    os << buf;
  }
}

void DiagnosticsReport::write_manifest(const std::filesystem::path& file) const {
  json j{{"B", bound_B},
         {"p_h", p_h},
         {"gamma", gamma_infinite ? json("infinite") : json(gamma)},
         {"lambda_prime", lambda_prime}};
  json probes_j = json::array();
  for (const auto& p : probes) {
    probes_j.push_back(json{{"epsilon", p.epsilon},
                            {"delta_T", p.delta_T},
                            {"delta_2T", p.delta_2T},
                            {"sup_forward_distance", p.sup_forward_distance},
                            {"sup_backward_distance", p.sup_backward_distance},
                            {"sup_I", p.sup_I},
                            {"sup_J", p.sup_J},
                            {"i_ratio", p.i_ratio},
                            {"x_dist_scaled", p.x_dist_scaled}});
  }
  j["probes"] = probes_j;
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file.string());
  os << j.dump(2) << "\n";
}

DiagnosticsAccumulator::DiagnosticsAccumulator(const GrowthModel& model,
                                               PressureLaw law, WeightSpec weight,
                                               double p_floor, double dt_nominal)
    : model_(&model), law_(law), weight_(weight), p_floor_(p_floor),
      dt_nominal_(dt_nominal) {
  report_.bound_B = model.bound;
  report_.p_h = model.p_h;
  report_.gamma = law.infinite ? 0.0 : law.gamma;
  report_.gamma_infinite = law.infinite;
  report_.lambda_prime = weight.lambda_prime;
}

void DiagnosticsAccumulator::accumulate(const SpeciesState& state, double dt) {
  const GridSpec& g = state.grid();
  const double vol = g.cell_volume();
  VectorField grad = gradient(state.p);
  ScalarField hn = hessian_norm(state.p);
  ScalarField G = total_growth(state, *model_);
  const bool finite = !state.law.infinite;
  ScalarField lap = finite ? laplacian(state.p) : ScalarField(g, 0.0);
  const double gamma = finite ? state.law.gamma : 1.0;
  const double lp = weight_.lambda_prime;

  KahanAccumulator ab, hess, wu, diss, rgs, mg;
  for (std::size_t c = 0; c < state.rho.values.size(); ++c) {
    double r = std::max(state.rho.values[c], 0.0);
    double pv = std::max(state.p.values[c], 0.0);
    double gx = grad.comp[0][c];
    double gy = grad.comp[1][c];
    double gn2 = gx * gx + gy * gy;
    hess.add(pv * hn.values[c] * hn.values[c]);
    diss.add(r * gn2 / (gamma * std::max(pv, p_floor_)));
    rgs.add(r * gn2);
    mg.add(r * G.values[c]);
    if (finite) {
      double u = -gamma * (lap.values[c] + G.values[c]);
      double up = u > 0.0 ? u : 0.0;
      ab.add(weight_.omega(pv) * up * up);
      double logf = std::log(1.0 + 1.0 / std::max(pv, p_floor_));
      wu.add(r * std::pow(logf, lp - 1.0) * std::abs(u));
    }
  }
  ab_.add(ab.value() * vol * dt);
  hessian_.add(hess.value() * vol * dt);
  weighted_u_.add(wu.value() * vol * dt);
  dissipation_.add(diss.value() * vol * dt);
  rho_grad_sq_.add(rgs.value() * vol * dt);
  mass_source_.add(mg.value() * vol * dt);
}

void DiagnosticsAccumulator::sample(const SpeciesState& state) {
  const GridSpec& g = state.grid();
  const double h = g.spacing(0);
  const double t = state.t;
  auto add = [&](const std::string& name, double value) {
    report_.append(t, name, value, h, dt_nominal_);
  };

  EntropyMoments em = entropy_and_moments(state, p_floor_);
  add("mass", em.mass);
  add("second_moment", em.second_moment);
  add("entropy", em.entropy);
  add("dissipation_qt", dissipation_.value());
  add("rho_grad_p_sq_qt", rho_grad_sq_.value());
  add("mass_source_qt", mass_source_.value());
  add("grad_p_l2_sq", [&] {
    VectorField grad = gradient(state.p);
    KahanAccumulator acc;
    for (std::size_t c = 0; c < grad.comp[0].size(); ++c) {
      acc.add(grad.comp[0][c] * grad.comp[0][c] + grad.comp[1][c] * grad.comp[1][c]);
    }
    return acc.value() * g.cell_volume();
  }());
  add("hessian_qt", hessian_.value());
  add("max_p", state.p.max_value());

  const double lp = weight_.lambda_prime;
  KahanAccumulator logmass, logmass2, degenerate;
  for (std::size_t c = 0; c < state.rho.values.size(); ++c) {
    double r = std::max(state.rho.values[c], 0.0);
    double pv = std::max(state.p.values[c], 0.0);
    double logf = std::log(1.0 + 1.0 / std::max(pv, p_floor_));
    logmass.add(r * std::pow(logf, lp));
    logmass2.add(r * logf * logf);
    if (r > state.vacuum_threshold() && pv < 1e-12) degenerate.add(r);
  }
  add("log_pressure_mass", logmass.value() * g.cell_volume());
  add("log_pressure_mass_sq", logmass2.value() * g.cell_volume());
  add("degenerate_mass", degenerate.value() * g.cell_volume());

  if (!state.law.infinite) {
    add("ab_qt", ab_.value());
    add("weighted_u_qt", weighted_u_.value());
    // pointwise AB surrogate: min_x gamma lap(p) * t
    ScalarField lap = laplacian(state.p);
    double worst = 0.0;
    for (double v : lap.values) worst = std::min(worst, v);
    add("min_gamma_lap_p_t", state.law.gamma * worst * t);
  }

  auto mm = mixing_metric(state);
  for (std::size_t a = 0; a < mm.size(); ++a) {
    for (std::size_t b = a + 1; b < mm.size(); ++b) {
      add("mixing_" + std::to_string(a) + "_" + std::to_string(b), mm[a][b]);
    }
  }
}

std::vector<DiagnosticsRow> ab_functional(const FieldHistory& history,
                                          const WeightSpec& weight) {
  std::vector<DiagnosticsRow> out;
  KahanAccumulator acc;
  for (std::size_t k = 0; k < history.size(); ++k) {
    const FieldSlice& s = history.slice(k);
    if (k > 0) {
      double dt = s.t - history.slice(k - 1).t;
      const double vol = s.p.grid.cell_volume();
      KahanAccumulator cell;
      for (std::size_t c = 0; c < s.p.values.size(); ++c) {
        double pv = std::max(s.p.values[c], 0.0);
        // u recovered from the stored trajectory pressure rate p_rate = -p u
        double u = pv > 1e-30 ? -s.p_rate.values[c] / pv : 0.0;
        double up = u > 0.0 ? u : 0.0;
        cell.add(weight.omega(pv) * up * up);
      }
      acc.add(cell.value() * vol * dt);
    }
    out.push_back({s.t, "ab_qt", acc.value(), s.p.grid.spacing(0), 0.0});
  }
  return out;
}

std::vector<DiagnosticsRow> weighted_l1_u(const FieldHistory& history,
                                          double lambda_prime, double p_floor) {
  std::vector<DiagnosticsRow> out;
  KahanAccumulator acc;
  for (std::size_t k = 0; k < history.size(); ++k) {
    const FieldSlice& s = history.slice(k);
    const double vol = s.p.grid.cell_volume();
    if (k > 0) {
      double dt = s.t - history.slice(k - 1).t;
      KahanAccumulator cell;
      for (std::size_t c = 0; c < s.p.values.size(); ++c) {
        double pv = std::max(s.p.values[c], 0.0);
        double r = std::max(s.rho.values[c], 0.0);
        double u = pv > 1e-30 ? -s.p_rate.values[c] / pv : 0.0;
        double logf = std::log(1.0 + 1.0 / std::max(pv, p_floor));
        cell.add(r * std::pow(logf, lambda_prime - 1.0) * std::abs(u));
      }
      acc.add(cell.value() * vol * dt);
    }
    KahanAccumulator inst;
    for (std::size_t c = 0; c < s.p.values.size(); ++c) {
      double pv = std::max(s.p.values[c], 0.0);
      double r = std::max(s.rho.values[c], 0.0);
      inst.add(r * std::pow(std::log(1.0 + 1.0 / std::max(pv, p_floor)), lambda_prime));
    }
    out.push_back({s.t, "weighted_u_qt", acc.value(), s.p.grid.spacing(0), 0.0});
    out.push_back({s.t, "log_pressure_mass", inst.value() * vol, s.p.grid.spacing(0), 0.0});
  }
  return out;
}

std::vector<DiagnosticsRow> hessian_functional(const FieldHistory& history) {
  std::vector<DiagnosticsRow> out;
  KahanAccumulator acc;
  for (std::size_t k = 0; k < history.size(); ++k) {
    const FieldSlice& s = history.slice(k);
    ScalarField hn = hessian_norm(s.p);
    const double vol = s.p.grid.cell_volume();
    if (k > 0) {
      double dt = s.t - history.slice(k - 1).t;
      KahanAccumulator cell;
      for (std::size_t c = 0; c < s.p.values.size(); ++c) {
        cell.add(std::max(s.p.values[c], 0.0) * hn.values[c] * hn.values[c]);
      }
      acc.add(cell.value() * vol * dt);
    }
    VectorField grad = gradient(s.p);
    KahanAccumulator g2;
    for (std::size_t c = 0; c < grad.comp[0].size(); ++c) {
      g2.add(grad.comp[0][c] * grad.comp[0][c] + grad.comp[1][c] * grad.comp[1][c]);
    }
    out.push_back({s.t, "hessian_qt", acc.value(), s.p.grid.spacing(0), 0.0});
    out.push_back({s.t, "grad_p_l2_sq", g2.value() * vol, s.p.grid.spacing(0), 0.0});
  }
  return out;
}

namespace {

double delta_weighted(const FieldHistory& history, const VectorField& w,
                      double epsilon, double t0, double t1) {
  // delta = eps * sqrt(int mu |w|^2) with mu = rho; trapezoid over slices
  KahanAccumulator acc;
  for (std::size_t k = 1; k < history.size(); ++k) {
    const FieldSlice& a = history.slice(k - 1);
    const FieldSlice& b = history.slice(k);
    if (b.t <= t0 || a.t >= t1) continue;
    double dt = std::min(b.t, t1) - std::max(a.t, t0);
    KahanAccumulator cell;
    for (std::size_t c = 0; c < b.rho.values.size(); ++c) {
      double wx = w.comp[0][c];
      double wy = w.comp[1][c];
      cell.add(std::max(b.rho.values[c], 0.0) * (wx * wx + wy * wy));
    }
    acc.add(cell.value() * b.rho.grid.cell_volume() * dt);
  }
  return std::abs(epsilon) * std::sqrt(std::max(acc.value(), 0.0));
}

std::size_t slice_at_or_before(const FieldHistory& history, double t) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (history.slice(k).t <= t + 1e-12) best = k;
  }
  return best;
}

}  // namespace

ProbeResult evaluate_stability_probe(const FieldHistory& history, const VectorField& w,
                                     double epsilon, double T, double lambda_prime,
                                     double B) {
  if (history.size() < 2) throw std::invalid_argument("probe needs a recorded history");
  const double t0 = history.t_front();
  if (t0 + 2.0 * T > history.t_back() + 1e-9) {
    throw std::invalid_argument("mismatched horizons: probe needs history up to 2T");
  }
  ProbeResult res;
  res.epsilon = epsilon;
  res.delta_T = std::max(delta_weighted(history, w, epsilon, t0, t0 + T), 1e-30);
  res.delta_2T = std::max(delta_weighted(history, w, epsilon, t0, t0 + 2.0 * T), 1e-30);

  HistoryVelocity vx(history);
  PerturbedVelocity vs(history, w, epsilon);
  FlowAdvanceOptions fopts;
  fopts.history = &history;

  const double s_list[2] = {t0, t0 + 0.5 * T};
  const double t_list[2] = {0.5 * T, T};
  for (double s : s_list) {
    std::size_t ks = slice_at_or_before(history, s);
    const FieldSlice& base = history.slice(ks);
    ParticleEnsemble ens = seed_ensemble_weighted(base.rho, base.t);
    for (double t : t_list) {
      if (base.t + t > history.t_back() + 1e-9) continue;
      FlowMapRecord X = advance_forward(ens, vx, t, fopts);
      FlowMapRecord S = advance_forward(ens, vs, t, fopts);
      KahanAccumulator dist, iacc;
      for (std::size_t j = 0; j < ens.size(); ++j) {
        double dx = X.ensemble.pos[j][0] - S.ensemble.pos[j][0];
        double dy = X.ensemble.pos[j][1] - S.ensemble.pos[j][1];
        double d = std::hypot(dx, dy);
        dist.add(ens.w[j] * d);
        double pv = std::max(history.pressure(base.t + t, X.ensemble.pos[j]), 0.0);
        double inner = std::log(1.0 + std::min(d, 1.0) / res.delta_2T);
        iacc.add(ens.w[j] * std::log(1.0 + pv * inner));
      }
      res.sup_forward_distance = std::max(res.sup_forward_distance, dist.value());
      res.sup_I = std::max(res.sup_I, iacc.value());

      // backward pair from base time s' = base.t + t
      std::size_t kb = slice_at_or_before(history, base.t + t);
      const FieldSlice& bback = history.slice(kb);
      if (bback.t - t >= t0 - 1e-9) {
        ParticleEnsemble ensb = seed_ensemble_weighted(bback.rho, bback.t);
        FlowMapRecord Y = advance_backward(ensb, vx, t, fopts);
        FlowMapRecord Z = advance_backward(ensb, vs, t, fopts);
        KahanAccumulator bdist, jacc;
        for (std::size_t j = 0; j < ensb.size(); ++j) {
          double dx = Y.ensemble.pos[j][0] - Z.ensemble.pos[j][0];
          double dy = Y.ensemble.pos[j][1] - Z.ensemble.pos[j][1];
          double d = std::hypot(dx, dy);
          bdist.add(ensb.w[j] * d);
          double pv = std::max(history.pressure(bback.t - t, Y.ensemble.pos[j]), 0.0);
          double inner = std::log(1.0 + std::min(d, 1.0) / res.delta_T);
          jacc.add(ensb.w[j] * std::log(1.0 + pv * inner));
        }
        res.sup_backward_distance = std::max(res.sup_backward_distance, bdist.value());
        res.sup_J = std::max(res.sup_J, jacc.value());
      }
    }
  }

  double loglog_2T = std::log(1.0 + std::log(1.0 + 1.0 / res.delta_2T));
  double loglog_T = std::log(1.0 + std::log(1.0 + 1.0 / res.delta_T));
  res.i_ratio = res.sup_I /
                (std::exp(B * T) * std::pow(loglog_2T, 1.0 - lambda_prime));
  res.x_dist_scaled = res.sup_forward_distance * std::pow(loglog_T, 0.5 * lambda_prime);
  return res;
}

double maximal_inequality_worst_ratio(const ScalarField& p, int pairs,
                                      std::uint64_t seed) {
  const GridSpec& g = p.grid;
  VectorField grad = gradient(p);
  MaximalFunctions mf = maximal_functions(p);
  std::mt19937_64 rng(seed);
  // interior cells only (one-sided boundary stencils are not covered by the
  // maximal bound)
  std::uniform_int_distribution<int> di(1, g.nx() - 2);
  std::uniform_int_distribution<int> dj(g.dim == 2 ? 1 : 0,
                                        g.dim == 2 ? g.ny() - 2 : 0);
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    int i1 = di(rng), j1 = dj(rng), i2 = di(rng), j2 = dj(rng);
    if (i1 == i2 && j1 == j2) continue;
    std::size_t c1 = g.index(i1, j1);
    std::size_t c2 = g.index(i2, j2);
    double gx = grad.comp[0][c1] - grad.comp[0][c2];
    double gy = grad.comp[1][c1] - grad.comp[1][c2];
    double lhs = std::max(p.values[c1], 0.0) * std::hypot(gx, gy);
    double dx = (i1 - i2) * g.spacing(0);
    double dy = g.dim == 2 ? (j1 - j2) * g.spacing(1) : 0.0;
    double dist = std::hypot(dx, dy);
    double rhs = dist * (mf.f.values[c1] + mf.f.values[c2] +
                         mf.g.values[c1] * mf.g.values[c1] +
                         mf.g.values[c2] * mf.g.values[c2]);
    if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
  }
  return worst;
}

}  // namespace pmflow
