#include "pmflow/hele_shaw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmflow/operators.hpp"

namespace pmflow {

namespace {

inline double ghost(const ScalarField& f, int i, int j) {
  const GridSpec& g = f.grid;
  if (g.boundary == BoundaryMode::Periodic) {
    i = ((i % g.nx()) + g.nx()) % g.nx();
    j = ((j % g.ny()) + g.ny()) % g.ny();
    return f.at(i, j);
  }
  if (i < 0 || i >= g.nx() || j < 0 || j >= g.ny()) return 0.0;
  return f.at(i, j);
}

}  // namespace

void ObstacleConfig::validate() const {
  if (!(tol_ob > 0.0)) throw std::invalid_argument("tol_ob must be positive");
  if (!(omega_sor >= 1.0 && omega_sor < 2.0)) {
    throw std::invalid_argument("omega_sor must lie in [1, 2)");
  }
}

ObstacleResult solve_complementarity(const ScalarField& rho, const ScalarField& G,
                                     const ObstacleConfig& cfg,
                                     const ScalarField* warm_start) {
  cfg.validate();
  const GridSpec& g = rho.grid;
  std::vector<char> sat(g.cell_count(), 0);
  bool any = false;
  for (std::size_t c = 0; c < sat.size(); ++c) {
    if (rho.values[c] >= kSaturationThreshold) {
      sat[c] = 1;
      any = true;
    }
  }

  ObstacleResult res;
  res.p = warm_start != nullptr ? *warm_start : ScalarField(g, 0.0, "p");
  res.p.name = "p";
  res.p.time = rho.time;
  for (std::size_t c = 0; c < sat.size(); ++c) {
    if (!sat[c] || res.p.values[c] < 0.0) res.p.values[c] = sat[c] ? std::max(res.p.values[c], 0.0) : 0.0;
  }
  if (!any) {
    res.converged = true;
    return res;
  }

  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
  const double diag = 2.0 * ihx2 + 2.0 * ihy2;

  auto residual = [&]() {
    double worst = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        if (!sat[g.index(i, j)]) continue;
        double c = res.p.at(i, j);
        double lap = (ghost(res.p, i - 1, j) - 2.0 * c + ghost(res.p, i + 1, j)) * ihx2;
        if (g.dim == 2) {
          lap += (ghost(res.p, i, j - 1) - 2.0 * c + ghost(res.p, i, j + 1)) * ihy2;
        }
        double slack = -lap - G.at(i, j);
        worst = std::max(worst, std::abs(std::min(c, slack)));
      }
    }
    return worst;
  };

  int sweep = 0;
  while (sweep < cfg.max_sweeps) {
    ++sweep;
    // red-black order: deterministic and parallelizable without races
    for (int color = 0; color < 2; ++color) {
      for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
          if (((i + j) & 1) != color) continue;
          if (!sat[g.index(i, j)]) continue;
          double nb = (ghost(res.p, i - 1, j) + ghost(res.p, i + 1, j)) * ihx2;
          if (g.dim == 2) nb += (ghost(res.p, i, j - 1) + ghost(res.p, i, j + 1)) * ihy2;
          double gs = (nb + G.at(i, j)) / diag;
          double old = res.p.at(i, j);
          double next = old + cfg.omega_sor * (gs - old);
          res.p.at(i, j) = next > 0.0 ? next : 0.0;
        }
      }
    }
    res.residual = residual();
    if (res.residual <= cfg.tol_ob) {
      res.converged = true;
      break;
    }
  }
  res.sweeps = sweep;
  return res;
}

double obstacle_energy(const ScalarField& p, const ScalarField& G) {
  const GridSpec& g = p.grid;
  const double vol = g.cell_volume();
  KahanAccumulator acc;
  // face-difference gradient energy with zero ghosts, matching the PSOR system
  for (int axis = 0; axis < g.dim; ++axis) {
    const double inv_h = 1.0 / g.spacing(axis);
    const int nfaces = g.boundary == BoundaryMode::Periodic ? g.cells[axis]
                                                            : g.cells[axis] + 1;
    const int nother = axis == 0 ? g.ny() : g.nx();
    for (int o = 0; o < nother; ++o) {
      for (int f = 0; f < nfaces; ++f) {
        int iL = axis == 0 ? f - 1 : o;
        int jL = axis == 0 ? o : f - 1;
        int iR = axis == 0 ? f : o;
        int jR = axis == 0 ? o : f;
        double d = (ghost(p, iR, jR) - ghost(p, iL, jL)) * inv_h;
        acc.add(0.5 * d * d * vol);
      }
    }
  }
  for (std::size_t c = 0; c < p.values.size(); ++c) {
    acc.add(-p.values[c] * G.values[c] * vol);
  }
  return acc.value();
}

HeleShawSolver::HeleShawSolver(GrowthModel model, ObstacleConfig ob, SolverConfig cfg,
                               NutrientParams nutrient)
    : model_(std::move(model)), ob_(ob), cfg_(cfg), nutrient_(std::move(nutrient)) {
  ob_.validate();
  cfg_.validate();
  if (nutrient_.enabled && nutrient_.beta.size() != model_.count()) {
    throw std::invalid_argument("nutrient beta list must match species count");
  }
}

namespace {

// Self-consistent complementarity pressure: Picard on (p, G(p)).
ObstacleResult picard_pressure(const SpeciesState& state, const GrowthModel& model,
                               const ObstacleConfig& ob, int* iterations) {
  SpeciesState probe = state;  // p is replaced between Picard passes
  ObstacleResult res;
  const int max_picard = 12;
  int it = 0;
  for (; it < max_picard; ++it) {
    ScalarField G = total_growth(probe, model);
    res = solve_complementarity(probe.rho, G, ob, it == 0 ? &state.p : &probe.p);
    double change = 0.0;
    for (std::size_t c = 0; c < res.p.values.size(); ++c) {
      change = std::max(change, std::abs(res.p.values[c] - probe.p.values[c]));
    }
    probe.p = res.p;
    if (change <= std::max(ob.tol_ob, 1e-12)) break;
  }
  if (iterations != nullptr) *iterations = it + 1;
  return res;
}

}  // namespace

ObstacleResult initial_complementarity_pressure(const SpeciesState& state,
                                                const GrowthModel& model,
                                                const ObstacleConfig& cfg) {
  int it = 0;
  return picard_pressure(state, model, cfg, &it);
}

IncompressibleStepReport HeleShawSolver::step_once(SpeciesState& state, double dt) {
  const GridSpec& g = state.grid();
  IncompressibleStepReport rep;

  for (const auto& r : state.rho_i) {
    if (r.min_value() < -1e-10) {
      throw std::runtime_error("incompressible step: negative density on entry");
    }
  }
  if (state.rho.max_value() > 1.0 + 1e-6) {
    throw std::runtime_error("incompressible step: rho exceeds 1 + 1e-6 on entry");
  }

  ObstacleResult press = picard_pressure(state, model_, ob_, &rep.picard_iterations);
  rep.pressure_converged = press.converged;
  rep.pressure_residual = press.residual;
  rep.psor_sweeps = press.sweeps;

  const std::vector<char> sat_before = [&] {
    std::vector<char> m(g.cell_count(), 0);
    for (std::size_t c = 0; c < m.size(); ++c) {
      m[c] = state.rho.values[c] >= kSaturationThreshold ? 1 : 0;
    }
    return m;
  }();
  const ScalarField rho_before = state.rho;

  // transport + sources along the complementarity pressure
  KahanAccumulator source_acc;
  transport_species(state.rho_i, press.p, dt, &model_, &press.p, &state.n, &source_acc);
  rep.source_mass = source_acc.value();

  if (nutrient_.enabled) {
    state.n = advance_nutrient_implicit(state.n, state.rho_i, nutrient_, dt,
                                        cfg_.tol_lin, cfg_.max_lin);
  }
  state.recompute_totals();

  // saturation repair: push excess outward along -grad p, fractions preserved
  const int sweep_cap = std::max(10000, 20 * std::max(g.nx(), g.ny()));
  int sweeps = 0;
  KahanAccumulator moved;
  while (state.rho.max_value() > 1.0 + 1e-6) {
    if (sweeps >= sweep_cap) {
      throw std::runtime_error("saturation repair failed: sweep cap reached");
    }
    ++sweeps;
    bool progressed = false;
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double total = state.rho.at(i, j);
        if (total <= 1.0 + 1e-6) continue;
        // steepest pressure descent among face neighbors; ties resolved by
        // smaller rho, then by fixed order (-x, +x, -y, +y)
        int bi = -1, bj = -1;
        double best_p = std::numeric_limits<double>::infinity();
        double best_rho = std::numeric_limits<double>::infinity();
        const int order = g.dim == 2 ? 4 : 2;
        const int di[4] = {-1, 1, 0, 0};
        const int dj[4] = {0, 0, -1, 1};
        for (int k = 0; k < order; ++k) {
          int ni = i + di[k];
          int nj = j + dj[k];
          if (g.boundary == BoundaryMode::Periodic) {
            ni = ((ni % g.nx()) + g.nx()) % g.nx();
            nj = ((nj % g.ny()) + g.ny()) % g.ny();
          } else if (ni < 0 || ni >= g.nx() || nj < 0 || nj >= g.ny()) {
            continue;
          }
          double pn = press.p.at(ni, nj);
          double rn = state.rho.at(ni, nj);
          if (pn < best_p - 1e-300 ||
              (pn == best_p && rn < best_rho)) {
            best_p = pn;
            best_rho = rn;
            bi = ni;
            bj = nj;
          }
        }
        if (bi < 0) {
          throw std::runtime_error(
              "saturation repair failed: no neighbor within domain");
        }
        double excess = total - 1.0;
        for (std::size_t s = 0; s < state.rho_i.size(); ++s) {
          double share = excess * state.rho_i[s].at(i, j) / total;
          state.rho_i[s].at(i, j) -= share;
          state.rho_i[s].at(bi, bj) += share;
        }
        state.rho.at(i, j) -= excess;
        state.rho.at(bi, bj) += excess;
        moved.add(excess);
        progressed = true;
      }
    }
    if (!progressed) {
      throw std::runtime_error("saturation repair failed: no progress");
    }
  }
  rep.repair_sweeps = sweeps;
  rep.repaired_mass = moved.value();

  state.recompute_totals();
  double drop = 0.0;
  for (std::size_t c = 0; c < state.rho.values.size(); ++c) {
    if (!sat_before[c]) continue;
    drop = std::min(drop, state.rho.values[c] - rho_before.values[c]);
  }
  rep.min_saturated_drop = drop;
  rep.max_rho_after = state.rho.max_value();

  state.t += dt;
  state.p = press.p;
  state.p.time = state.t;
  state.n.time = state.t;
  state.rho.time = state.t;
  for (auto& r : state.rho_i) r.time = state.t;
  return rep;
}

IncompressibleStepReport HeleShawSolver::step(SpeciesState& state) {
  return step(state, cfg_.dt);
}

IncompressibleStepReport HeleShawSolver::step(
    SpeciesState& state, double dt_step,
    const std::function<void(const SpeciesState&, double)>& on_substep) {
  int picard_it = 0;
  ObstacleResult pre = picard_pressure(state, model_, ob_, &picard_it);
  state.p = pre.p;  // warm start for substeps, and the CFL estimate below
  double vmax = gradient(pre.p).max_norm();
  double hmin = state.grid().spacing(0);
  if (state.grid().dim == 2) hmin = std::min(hmin, state.grid().spacing(1));
  double dt_max = cfg_.cfl * hmin / std::max(vmax, 1e-12);
  if (model_.bound > 0.0) dt_max = std::min(dt_max, 0.5 / model_.bound);

  int n_sub = std::max(1, static_cast<int>(std::ceil(dt_step / dt_max - 1e-12)));
  double dt_sub = dt_step / static_cast<double>(n_sub);

  IncompressibleStepReport total;
  total.min_saturated_drop = 0.0;
  for (int k = 0; k < n_sub; ++k) {
    IncompressibleStepReport r = step_once(state, dt_sub);
    total.pressure_converged = total.pressure_converged && r.pressure_converged;
    total.pressure_residual = std::max(total.pressure_residual, r.pressure_residual);
    total.psor_sweeps += r.psor_sweeps;
    total.picard_iterations += r.picard_iterations;
    total.repair_sweeps += r.repair_sweeps;
    total.repaired_mass += r.repaired_mass;
    total.source_mass += r.source_mass;
    total.max_rho_after = r.max_rho_after;
    total.min_saturated_drop = std::min(total.min_saturated_drop, r.min_saturated_drop);
    if (on_substep) on_substep(state, dt_sub);
  }
  return total;
}

HeleShawRunResult run_hele_shaw(HeleShawSolver& solver, SpeciesState initial,
                                double horizon, const RunOptions& opts) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be nonnegative");
  HeleShawRunResult res;
  SpeciesState& state = initial;
  const double t_end = state.t + horizon;

  std::vector<double> samples = opts.sample_times;
  std::sort(samples.begin(), samples.end());

  auto push_series = [&](const SpeciesState& s) {
    SeriesPoint pt;
    pt.t = s.t;
    pt.mass = integrate(s.rho);
    pt.max_p = s.p.max_value();
    double mr = 0.0;
    for (const auto& r : s.rho_i) mr = std::min(mr, r.min_value());
    pt.min_rho = mr;
    pt.support_radius = support_radius(s.rho, 1e-6 * std::max(s.rho.max_value(), 1e-300));
    res.series.push_back(pt);
  };

  int counter = 0;
  auto on_substep = [&](const SpeciesState& s, double dt_sub) {
    ++counter;
    push_series(s);
    if (opts.record_history && counter % std::max(1, opts.history_stride) == 0) {
      res.history.record(s);
    }
    if (opts.on_substep) opts.on_substep(s, dt_sub);
  };

  push_series(state);
  if (opts.record_history) res.history.record(state);
  std::size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] <= state.t + 1e-12) {
    res.snapshots.push_back(state);
    ++next_sample;
  }

  const double dt_cfg = solver.config().dt;
  while (state.t < t_end - 1e-12) {
    double next_stop = t_end;
    if (next_sample < samples.size()) next_stop = std::min(next_stop, samples[next_sample]);
    double dt_step = std::min(dt_cfg, next_stop - state.t);
    IncompressibleStepReport rep = solver.step(state, dt_step, on_substep);
    res.total_steps += 1;
    res.any_unconverged = res.any_unconverged || !rep.pressure_converged;
    res.source_mass_total += rep.source_mass;
    res.worst_saturated_drop = std::min(res.worst_saturated_drop, rep.min_saturated_drop);
    while (next_sample < samples.size() && samples[next_sample] <= state.t + 1e-12) {
      res.snapshots.push_back(state);
      ++next_sample;
    }
  }
  res.final_state = std::move(state);
  return res;
}

GammaSweepResult gamma_sweep(const std::vector<ScalarField>& rho_i0,
                             const ScalarField& n0, const ScalarField& p0,
                             const GrowthModel& model,
                             const std::vector<double>& gammas, double horizon,
                             const SolverConfig& cfg, const ObstacleConfig& ob,
                             const NutrientParams& nutrient) {
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    if (!(gammas[i] > gammas[i - 1])) {
      throw std::invalid_argument("gamma list must be increasing");
    }
  }
  GammaSweepResult out;

  // limit row: the hele-shaw run itself
  auto t0 = std::chrono::steady_clock::now();
  SpeciesState hs0 = make_species_state(rho_i0, n0, PressureLaw::hele_shaw());
  hs0.p = p0;
  HeleShawSolver hs(model, ob, cfg, nutrient);
  KahanAccumulator hs_defect;
  RunOptions hs_opts;
  hs_opts.record_history = false;
  hs_opts.on_substep = [&](const SpeciesState& s, double dt_sub) {
    KahanAccumulator cell;
    for (std::size_t c = 0; c < s.p.values.size(); ++c) {
      cell.add(std::abs(s.p.values[c] * (1.0 - s.rho.values[c])));
    }
    hs_defect.add(cell.value() * s.grid().cell_volume() * dt_sub);
  };
  HeleShawRunResult hs_run = run_hele_shaw(hs, hs0, horizon, hs_opts);
  GammaSweepRow limit_row;
  limit_row.is_limit = true;
  limit_row.defect_l1_qt = hs_defect.value();
  limit_row.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.limit_final = hs_run.final_state;

  ScalarField rho0_total(n0.grid, 0.0);
  for (const auto& r : rho_i0) {
    for (std::size_t c = 0; c < rho0_total.values.size(); ++c) {
      rho0_total.values[c] += r.values[c];
    }
  }

  for (double gamma : gammas) {
    auto tg = std::chrono::steady_clock::now();
    PressureLaw law = PressureLaw::finite(gamma);
    std::vector<ScalarField> rho_ig;
    ScalarField rho_g(n0.grid, 0.0, "rho");
    for (std::size_t c = 0; c < rho_g.values.size(); ++c) {
      double pv = std::max(p0.values[c], 0.0);
      rho_g.values[c] = pv > 0.0 ? std::pow(pv, 1.0 / gamma) : 0.0;
    }
    for (const auto& r : rho_i0) {
      ScalarField ri(n0.grid, 0.0, r.name);
      for (std::size_t c = 0; c < ri.values.size(); ++c) {
        double tot = rho0_total.values[c];
        ri.values[c] = tot > 0.0 ? rho_g.values[c] * r.values[c] / tot : 0.0;
      }
      rho_ig.push_back(std::move(ri));
    }
    SpeciesState st = make_species_state(rho_ig, n0, law);
    PmeSolver solver(model, law, cfg, nutrient);
    KahanAccumulator defect;
    RunOptions opts;
    opts.record_history = false;
    opts.on_substep = [&](const SpeciesState& s, double dt_sub) {
      KahanAccumulator cell;
      for (std::size_t c = 0; c < s.p.values.size(); ++c) {
        cell.add(std::abs(s.p.values[c] * (1.0 - s.rho.values[c])));
      }
      defect.add(cell.value() * s.grid().cell_volume() * dt_sub);
    };
    RunResult run = run_pme(solver, st, horizon, opts);

    GammaSweepRow row;
    row.gamma = gamma;
    row.defect_l1_qt = defect.value();
    row.p_distance_l2 = distance_l2(run.final_state.p, out.limit_final.p);
    row.rho_distance_l1 = distance_l1(run.final_state.rho, out.limit_final.rho);
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tg).count();
    out.rows.push_back(row);
  }
  out.rows.push_back(limit_row);
  return out;
}

}  // namespace pmflow
