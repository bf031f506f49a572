#include "pmflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "pmflow/field_io.hpp"
#include "pmflow/operators.hpp"

namespace pmflow {

using nlohmann::json;

namespace {

inline double ghost_sample(const ScalarField& f, int i, int j) {
  const GridSpec& g = f.grid;
  if (g.boundary == BoundaryMode::Periodic) {
    i = ((i % g.nx()) + g.nx()) % g.nx();
    j = ((j % g.ny()) + g.ny()) % g.ny();
    return f.at(i, j);
  }
  if (i < 0 || i >= g.nx() || j < 0 || j >= g.ny()) return 0.0;
  return f.at(i, j);
}

// Same stencil as laplacian() so the implicit operator matches the explicit one.
void apply_laplacian(const ScalarField& x, std::vector<double>& out) {
  const GridSpec& g = x.grid;
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double c = x.at(i, j);
      double v = (ghost_sample(x, i - 1, j) - 2.0 * c + ghost_sample(x, i + 1, j)) * ihx2;
      if (g.dim == 2) {
        v += (ghost_sample(x, i, j - 1) - 2.0 * c + ghost_sample(x, i, j + 1)) * ihy2;
      }
      out[g.index(i, j)] = v;
    }
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("solver dt must be positive");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw std::invalid_argument("cfl must be in (0,1]");
  if (!(tol_fp > 0.0)) throw std::invalid_argument("tol_fp must be positive");
  if (max_fp < 2) throw std::invalid_argument("max fixed-point iterations must be >= 2");
}

namespace {

// |grad f|^2 with the operator module's stencil: centered differences in the
// interior, one-sided second order at truncated boundaries, periodic wrap.
void grad_squared(const ScalarField& f, std::vector<double>& out) {
  const GridSpec& g = f.grid;
  const bool periodic = g.boundary == BoundaryMode::Periodic;
  std::fill(out.begin(), out.end(), 0.0);
  for (int axis = 0; axis < g.dim; ++axis) {
    const double inv2h = 1.0 / (2.0 * g.spacing(axis));
    const int n = g.cells[axis];
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        int idx = axis == 0 ? i : j;
        double d;
        if (periodic || (idx > 0 && idx < n - 1)) {
          double fp = axis == 0 ? ghost_sample(f, i + 1, j) : ghost_sample(f, i, j + 1);
          double fm = axis == 0 ? ghost_sample(f, i - 1, j) : ghost_sample(f, i, j - 1);
          d = (fp - fm) * inv2h;
        } else if (idx == 0) {
          double f0 = f.at(i, j);
          double f1 = axis == 0 ? f.at(i + 1, j) : f.at(i, j + 1);
          double f2 = axis == 0 ? f.at(i + 2, j) : f.at(i, j + 2);
          d = (-3.0 * f0 + 4.0 * f1 - f2) * inv2h;
        } else {
          double f0 = f.at(i, j);
          double f1 = axis == 0 ? f.at(i - 1, j) : f.at(i, j - 1);
          double f2 = axis == 0 ? f.at(i - 2, j) : f.at(i, j - 2);
          d = (3.0 * f0 - 4.0 * f1 + f2) * inv2h;
        }
        out[g.index(i, j)] += d * d;
      }
    }
  }
}

}  // namespace

void transport_species(const std::vector<ScalarField>& rho_in,
                       std::vector<ScalarField>& out, const ScalarField& p_drive,
                       double dt, const GrowthModel* model,
                       const ScalarField* p_source, const ScalarField* n_source,
                       KahanAccumulator* source_mass) {
  const GridSpec& g = p_drive.grid;
  const bool periodic = g.boundary == BoundaryMode::Periodic;
  const double vol = g.cell_volume();

  out = rho_in;

  for (int axis = 0; axis < g.dim; ++axis) {
    const double h = g.spacing(axis);
    const double inv_h = 1.0 / h;
    const int nfaces = periodic ? g.cells[axis] : g.cells[axis] - 1;
    const int nother = axis == 0 ? g.ny() : g.nx();
    for (int o = 0; o < nother; ++o) {
      for (int f = 0; f < nfaces; ++f) {
        // face between cells L=(f) and R=(f+1) along `axis`
        int iL = axis == 0 ? f : o;
        int jL = axis == 0 ? o : f;
        int iR = axis == 0 ? (f + 1) % g.nx() : o;
        int jR = axis == 0 ? o : (f + 1) % g.ny();
        double v = -(p_drive.at(iR, jR) - p_drive.at(iL, jL)) * inv_h;
        for (std::size_t s = 0; s < rho_in.size(); ++s) {
          double up = v > 0.0 ? rho_in[s].at(iL, jL) : rho_in[s].at(iR, jR);
          double flux = v * up * dt * inv_h;
          out[s].at(iL, jL) -= flux;
          out[s].at(iR, jR) += flux;
        }
      }
    }
  }

  if (model != nullptr) {
    for (std::size_t s = 0; s < out.size(); ++s) {
      for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
          double pv = p_source ? std::max(p_source->at(i, j), 0.0) : 0.0;
          double nv = n_source ? std::max(n_source->at(i, j), 0.0) : 0.0;
          double gi = model->growth(s, pv, nv);
          double r = out[s].at(i, j);
          double ds = dt * r * gi;
          out[s].at(i, j) = r + ds;
          if (source_mass != nullptr) source_mass->add(ds * vol);
        }
      }
    }
  }
}

void transport_species(std::vector<ScalarField>& rho_i, const ScalarField& p_drive,
                       double dt, const GrowthModel* model,
                       const ScalarField* p_source, const ScalarField* n_source,
                       KahanAccumulator* source_mass) {
  thread_local std::vector<ScalarField> buf;
  buf = rho_i;
  transport_species(buf, rho_i, p_drive, dt, model, p_source, n_source, source_mass);
}

int solve_diffusion_implicit(const ScalarField& coeff_D, double dt,
                             const ScalarField& rhs, ScalarField& x, double tol,
                             int max_iter) {
  const GridSpec& g = rhs.grid;
  const std::size_t n = g.cell_count();
  // workspace reused across calls; the solver is called once per fixed-point
  // iteration and allocation churn dominates otherwise
  thread_local std::vector<double> inv_d, b, r, z, p, q, lap;
  inv_d.assign(n, 0.0);
  b.assign(n, 0.0);
  r.assign(n, 0.0);
  z.assign(n, 0.0);
  p.assign(n, 0.0);
  q.assign(n, 0.0);
  lap.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    double d = coeff_D.values[c];
    if (!(d > 0.0)) throw std::invalid_argument("diffusion coefficient must be positive");
    inv_d[c] = 1.0 / d;
    b[c] = rhs.values[c] * inv_d[c];
  }
  double diag_lap = 2.0 / (g.spacing(0) * g.spacing(0));
  if (g.dim == 2) diag_lap += 2.0 / (g.spacing(1) * g.spacing(1));

  auto matvec = [&](const ScalarField& in, std::vector<double>& outv) {
    apply_laplacian(in, lap);
    for (std::size_t c = 0; c < n; ++c) {
      outv[c] = in.values[c] * inv_d[c] - dt * lap[c];
    }
  };

  thread_local ScalarField work;
  work = x;
  matvec(work, q);
  for (std::size_t c = 0; c < n; ++c) r[c] = b[c] - q[c];
  double bnorm = std::sqrt(det_dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.values.begin(), x.values.end(), 0.0);
    return 0;
  }
  double rtol = tol * bnorm;
  auto precond = [&](const std::vector<double>& rin, std::vector<double>& zout) {
    for (std::size_t c = 0; c < n; ++c) zout[c] = rin[c] / (inv_d[c] + dt * diag_lap);
  };
  precond(r, z);
  p = z;
  double rz = det_dot(r, z);
  int it = 0;
  while (it < max_iter) {
    double rnorm = std::sqrt(det_dot(r, r));
    if (rnorm <= rtol) break;
    ++it;
    std::copy(p.begin(), p.end(), work.values.begin());
    matvec(work, q);
    double pq = det_dot(p, q);
    if (pq == 0.0) break;
    double alpha = rz / pq;
    for (std::size_t c = 0; c < n; ++c) {
      x.values[c] += alpha * p[c];
      r[c] -= alpha * q[c];
    }
    precond(r, z);
    double rz_new = det_dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t c = 0; c < n; ++c) p[c] = z[c] + beta * p[c];
  }
  return it;
}

PmeSolver::PmeSolver(GrowthModel model, PressureLaw law, SolverConfig cfg,
                     NutrientParams nutrient)
    : model_(std::move(model)), law_(law), cfg_(cfg), nutrient_(std::move(nutrient)) {
  if (law_.infinite) {
    throw std::invalid_argument(
        "PmeSolver requires a finite gamma; the incompressible system is handled "
        "by the hele-shaw solver");
  }
  cfg_.validate();
  if (nutrient_.enabled && nutrient_.beta.size() != model_.count()) {
    throw std::invalid_argument("nutrient beta list must match species count");
  }
}

ScalarField advance_nutrient_implicit(const ScalarField& n_old,
                                      const std::vector<ScalarField>& rho_i,
                                      const NutrientParams& nutrient, double dt,
                                      double tol_lin, int max_lin) {
  ScalarField rhs = n_old;
  for (std::size_t c = 0; c < rhs.values.size(); ++c) {
    double cons = 0.0;
    for (std::size_t s = 0; s < rho_i.size(); ++s) {
      cons += nutrient.beta[s] * std::max(rho_i[s].values[c], 0.0);
    }
    double nv = std::max(n_old.values[c], 0.0);
    rhs.values[c] = n_old.values[c] - dt * nv * cons;
  }
  if (nutrient.alpha <= 0.0) return rhs;
  ScalarField coeff(n_old.grid, nutrient.alpha);
  ScalarField n_new = n_old;  // warm start
  solve_diffusion_implicit(coeff, dt, rhs, n_new, tol_lin, max_lin);
  return n_new;
}

ScalarField PmeSolver::advance_nutrient(const ScalarField& n_old,
                                        const std::vector<ScalarField>& rho_i,
                                        double dt) {
  return advance_nutrient_implicit(n_old, rho_i, nutrient_, dt, cfg_.tol_lin,
                                   cfg_.max_lin);
}

StepReport PmeSolver::step_once(SpeciesState& state, double dt) {
  const GridSpec& g = state.grid();
  const double gamma = law_.gamma;
  StepReport rep;
  rep.subcycles = 1;

  const ScalarField p_old = state.p;
  const ScalarField n_old = state.n;
  const std::vector<ScalarField> rho_old = state.rho_i;
  const double thr_old = state.vacuum_threshold();

  std::vector<ScalarField> rho_m = state.rho_i;
  ScalarField p_m = state.p;
  ScalarField n_m = state.n;
  KahanAccumulator source_acc;

  double residual = 0.0;
  bool converged = false;
  int m = 0;
  const double uniform = 1.0 / static_cast<double>(model_.count());
  const std::size_t ncells = g.cell_count();
  std::vector<double> tot(ncells), Gm(ncells), gradsq(ncells);
  ScalarField rhs(g, 0.0), coeff(g, 0.0), p_new(g, 0.0);

  while (m < cfg_.max_fp) {
    ++m;
    const double eps_m = std::max(1.0 / static_cast<double>(m), cfg_.eps_min);

    // (a) freeze fractions and G^m from the current iterate
    std::fill(tot.begin(), tot.end(), 0.0);
    for (const auto& rsp : rho_m) {
      for (std::size_t c = 0; c < ncells; ++c) tot[c] += rsp.values[c];
    }
    for (std::size_t c = 0; c < ncells; ++c) {
      double pv = std::max(p_m.values[c], 0.0);
      double nv = std::max(n_m.values[c], 0.0);
      double acc = 0.0;
      for (std::size_t s = 0; s < model_.count(); ++s) {
        double ci = tot[c] > thr_old ? rho_m[s].values[c] / tot[c] : uniform;
        acc += ci * model_.growth(s, pv, nv);
      }
      Gm[c] = acc;
    }

    // (b) semi-implicit pressure solve with lagged coefficient gamma (p_m + eps);
    // |grad p_m|^2 uses the operator module's stencil (centered interior,
    // one-sided second order at truncated boundaries)
    grad_squared(p_m, gradsq);
    for (std::size_t c = 0; c < ncells; ++c) {
      double pv = std::max(p_m.values[c], 0.0);
      rhs.values[c] = p_old.values[c] + dt * (gradsq[c] + gamma * pv * Gm[c]);
      coeff.values[c] = gamma * (pv + eps_m);
    }
    p_new = p_m;  // warm start
    solve_diffusion_implicit(coeff, dt, rhs, p_new, cfg_.tol_lin, cfg_.max_lin);
    for (double& v : p_new.values) {
      if (v < 0.0) v = 0.0;
    }

    // (c) upwind transport of each rho_i from the step's initial densities
    source_acc = KahanAccumulator{};
    transport_species(rho_old, rho_m, p_new, dt, &model_, &p_new, &n_m, &source_acc);

    // (d) nutrient: implicit diffusion, explicit consumption
    if (nutrient_.enabled) n_m = advance_nutrient(n_old, rho_m, dt);

    residual = 0.0;
    for (std::size_t c = 0; c < ncells; ++c) {
      residual = std::max(residual, std::abs(p_new.values[c] - p_m.values[c]));
    }
    std::swap(p_m, p_new);
    if (residual <= cfg_.tol_fp) {
      converged = true;
      break;
    }
  }
  rep.fp_iterations = m;
  rep.fp_converged = converged;
  rep.fp_residual = residual;
  rep.source_mass = source_acc.value();

  // resync: blend rho toward p^{1/gamma} (bulk cells only, correction capped),
  // restore the flux-form + source mass exactly, then p := rho^gamma.
  std::fill(tot.begin(), tot.end(), 0.0);
  for (const auto& rsp : rho_m) {
    for (std::size_t c = 0; c < tot.size(); ++c) tot[c] += rsp.values[c];
  }
  double max_tot = 0.0;
  KahanAccumulator mass_new;
  for (double v : tot) {
    max_tot = std::max(max_tot, v);
    mass_new.add(v);
  }
  const double thr = SpeciesState::kVacuumRel * max_tot;
  std::vector<double> factor(tot.size(), 1.0);
  KahanAccumulator mass_blend;
  const double w = cfg_.resync_weight;
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t c = 0; c < tot.size(); ++c) {
    double r = tot[c];
    if (r > thr && r > 0.0) {
      double target = std::pow(std::max(p_m.values[c], 0.0), inv_gamma);
      double delta = target - r;
      double cap = 0.5 * r;
      if (delta > cap) delta = cap;
      if (delta < -cap) delta = -cap;
      factor[c] = (r + w * delta) / r;
    }
    mass_blend.add(r * factor[c]);
  }
  double scale = 1.0;
  if (mass_blend.value() > 0.0 && mass_new.value() > 0.0) {
    scale = mass_new.value() / mass_blend.value();
  }
  double min_rho = 0.0;
  for (auto& rsp : rho_m) {
    for (std::size_t c = 0; c < rsp.values.size(); ++c) {
      rsp.values[c] *= factor[c] * scale;
      min_rho = std::min(min_rho, rsp.values[c]);
    }
  }
  if (min_rho < -1e-10) {
    throw std::runtime_error("scheme failure: density dropped below -1e-10 (" +
                             std::to_string(min_rho) + ")");
  }

  state.rho_i = std::move(rho_m);
  state.t += dt;
  state.recompute_totals();
  state.sync_pressure();
  state.n = n_m;
  state.n.time = state.t;

  rep.max_pressure = state.p.max_value();
  if (g.boundary == BoundaryMode::TruncatedBuffer) {
    rep.buffer_warning = support_buffer_cells(state.rho, thr) < 4;
  }
  return rep;
}

StepReport PmeSolver::step(SpeciesState& state) { return step(state, cfg_.dt); }

StepReport PmeSolver::step(SpeciesState& state, double dt_step,
                           const std::function<void(const SpeciesState&, double)>& on_substep) {
  // CFL: effective dt <= cfl*h/max(|grad p|, eps), with additional positivity
  // caps for the explicit source terms.
  double vmax = gradient(state.p).max_norm();
  double hmin = state.grid().spacing(0);
  if (state.grid().dim == 2) hmin = std::min(hmin, state.grid().spacing(1));
  double dt_max = cfg_.cfl * hmin / std::max(vmax, 1e-12);
  if (model_.bound > 0.0) {
    dt_max = std::min(dt_max, 0.5 / model_.bound);
    dt_max = std::min(dt_max, 0.5 / (law_.gamma * model_.bound));
  }
  if (nutrient_.enabled) {
    double cons_max = 0.0;
    for (std::size_t c = 0; c < state.n.values.size(); ++c) {
      double cons = 0.0;
      for (std::size_t s = 0; s < state.rho_i.size(); ++s) {
        cons += nutrient_.beta[s] * std::max(state.rho_i[s].values[c], 0.0);
      }
      cons_max = std::max(cons_max, cons);
    }
    if (cons_max > 0.0) dt_max = std::min(dt_max, 0.5 / cons_max);
  }

  int n_sub = std::max(1, static_cast<int>(std::ceil(dt_step / dt_max - 1e-12)));
  double dt_sub = dt_step / static_cast<double>(n_sub);

  StepReport total;
  for (int k = 0; k < n_sub; ++k) {
    StepReport r = step_once(state, dt_sub);
    total.subcycles += 1;
    total.fp_iterations += r.fp_iterations;
    total.fp_converged = total.fp_converged && r.fp_converged;
    total.fp_residual = std::max(total.fp_residual, r.fp_residual);
    total.source_mass += r.source_mass;
    total.max_pressure = r.max_pressure;
    total.buffer_warning = total.buffer_warning || r.buffer_warning;
    if (on_substep) on_substep(state, dt_sub);
  }
  return total;
}

SpeciesState mollify_initial_data(const std::vector<ScalarField>& rho_i0,
                                  const ScalarField& n0, const MollifierSpec& spec,
                                  PressureLaw law, bool* width_below_grid) {
  if (spec.k < 1) throw std::invalid_argument("mollifier index k must be >= 1");
  const GridSpec& g = n0.grid;
  const double width = 1.0 / static_cast<double>(spec.k);
  const double hx = g.spacing(0);
  const double hy = g.dim == 2 ? g.spacing(1) : hx;
  const bool degenerate = width < std::min(hx, hy);
  if (width_below_grid != nullptr) *width_below_grid = degenerate;

  // compactly supported bump of width 1/k, normalized so the discrete kernel
  // sums to exactly one (mass-preserving convolution of nonnegatives)
  struct Tap {
    int di, dj;
    double w;
  };
  std::vector<Tap> taps;
  int ri = static_cast<int>(std::floor(width / hx));
  int rj = g.dim == 2 ? static_cast<int>(std::floor(width / hy)) : 0;
  KahanAccumulator wsum;
  for (int dj = -rj; dj <= rj; ++dj) {
    for (int di = -ri; di <= ri; ++di) {
      double r2 = (di * hx * di * hx + dj * hy * dj * hy) / (width * width);
      if (r2 >= 1.0) continue;
      double w = std::exp(-1.0 / (1.0 - r2));
      taps.push_back({di, dj, w});
      wsum.add(w);
    }
  }
  if (taps.empty()) taps.push_back({0, 0, 1.0});
  double norm = 1.0 / (taps.empty() ? 1.0 : wsum.value());
  if (taps.size() == 1) norm = 1.0 / taps[0].w;
  for (auto& t : taps) t.w *= norm;

  auto convolve = [&](const ScalarField& f) {
    ScalarField out(g, 0.0, f.name);
    out.time = f.time;
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        KahanAccumulator acc;
        for (const Tap& t : taps) acc.add(t.w * ghost_sample(f, i - t.di, j - t.dj));
        out.at(i, j) = acc.value();
      }
    }
    return out;
  };

  std::vector<ScalarField> rho_out;
  rho_out.reserve(rho_i0.size());
  const double floor_amp = 1.0 / static_cast<double>(spec.k);
  for (const ScalarField& r0 : rho_i0) {
    ScalarField r = convolve(r0);
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double x = g.center(0, i);
        double rr2 = x * x;
        if (g.dim == 2) {
          double y = g.center(1, j);
          rr2 += y * y;
        }
        r.at(i, j) += floor_amp * std::exp(-rr2);
      }
    }
    rho_out.push_back(std::move(r));
  }
  ScalarField n_out = convolve(n0);
  return make_species_state(rho_out, n_out, law);
}

void FieldHistory::record(const SpeciesState& state, const GrowthModel* model) {
  FieldSlice s;
  s.t = state.t;
  s.p = state.p;
  s.n = state.n;
  s.rho = state.rho;
  s.vel = gradient(state.p);
  for (int ax = 0; ax < 2; ++ax) {
    for (double& v : s.vel.comp[ax]) v = -v;
  }
  s.p_rate = ScalarField(state.grid(), 0.0, "p_rate");
  if (model != nullptr && !state.law.infinite) {
    ScalarField u = u_field(state, *model);
    for (std::size_t c = 0; c < u.values.size(); ++c) {
      s.p_rate.values[c] = -std::max(state.p.values[c], 0.0) * u.values[c];
    }
  }
  s.p_rate.time = state.t;
  if (!slices_.empty() && slices_.back().t >= s.t) {
    throw std::logic_error("FieldHistory: slices must be recorded in time order");
  }
  slices_.push_back(std::move(s));
}

std::pair<std::size_t, double> FieldHistory::locate(double t) const {
  if (slices_.empty()) throw std::logic_error("FieldHistory is empty");
  if (slices_.size() == 1 || t <= slices_.front().t) return {0, 0.0};
  if (t >= slices_.back().t) return {slices_.size() - 2, 1.0};
  std::size_t lo = 0, hi = slices_.size() - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (slices_[mid].t <= t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double span = slices_[hi].t - slices_[lo].t;
  double w = span > 0.0 ? (t - slices_[lo].t) / span : 0.0;
  return {lo, w};
}

std::array<double, 2> FieldHistory::velocity(double t, std::array<double, 2> x) const {
  auto [i, w] = locate(t);
  auto a = interpolate(slices_[i].vel, x);
  auto b = interpolate(slices_[i + 1].vel, x);
  return {a[0] * (1.0 - w) + b[0] * w, a[1] * (1.0 - w) + b[1] * w};
}

double FieldHistory::pressure(double t, std::array<double, 2> x) const {
  auto [i, w] = locate(t);
  return interpolate(slices_[i].p, x) * (1.0 - w) + interpolate(slices_[i + 1].p, x) * w;
}

double FieldHistory::nutrient(double t, std::array<double, 2> x) const {
  auto [i, w] = locate(t);
  return interpolate(slices_[i].n, x) * (1.0 - w) + interpolate(slices_[i + 1].n, x) * w;
}

double FieldHistory::pressure_rate(double t, std::array<double, 2> x) const {
  auto [i, w] = locate(t);
  return interpolate(slices_[i].p_rate, x) * (1.0 - w) +
         interpolate(slices_[i + 1].p_rate, x) * w;
}

double FieldHistory::grid_spacing_min() const {
  const GridSpec& g = slices_.front().p.grid;
  double h = g.spacing(0);
  if (g.dim == 2) h = std::min(h, g.spacing(1));
  return h;
}

double FieldHistory::min_slice_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < slices_.size(); ++i) {
    gap = std::min(gap, slices_[i].t - slices_[i - 1].t);
  }
  return gap;
}

double FieldHistory::max_speed() const {
  double m = 0.0;
  for (const auto& s : slices_) m = std::max(m, s.vel.max_norm());
  return m;
}

RunResult run_pme(PmeSolver& solver, SpeciesState initial, double horizon,
                  const RunOptions& opts) {
  if (horizon < 0.0) throw std::invalid_argument("horizon must be nonnegative");
  RunResult res;
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

  int substep_counter = 0;
  auto on_substep = [&](const SpeciesState& s, double dt_sub) {
    ++substep_counter;
    push_series(s);
    if (opts.record_history && substep_counter % std::max(1, opts.history_stride) == 0) {
      res.history.record(s, &solver.model());
    }
    if (opts.on_substep) opts.on_substep(s, dt_sub);
  };

  push_series(state);
  if (opts.record_history) res.history.record(state, &solver.model());

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
    StepReport rep = solver.step(state, dt_step, on_substep);
    res.total_steps += 1;
    res.total_fp_iterations += rep.fp_iterations;
    res.any_fp_unconverged = res.any_fp_unconverged || !rep.fp_converged;
    res.buffer_warning = res.buffer_warning || rep.buffer_warning;
    res.source_mass_total += rep.source_mass;
    while (next_sample < samples.size() && samples[next_sample] <= state.t + 1e-12) {
      res.snapshots.push_back(state);
      ++next_sample;
    }
  }
  res.final_state = std::move(state);
  return res;
}

void write_checkpoint(const std::filesystem::path& dir, const SpeciesState& state,
                      int step_index, const std::string& config_fingerprint,
                      double source_mass_total) {
  std::filesystem::create_directories(dir);
  for (std::size_t s = 0; s < state.rho_i.size(); ++s) {
    write_field(dir / ("rho_" + std::to_string(s)), state.rho_i[s]);
  }
  write_field(dir / "p", state.p);
  write_field(dir / "n", state.n);
  json j{{"step_index", step_index},
         {"time", state.t},
         {"time_hex", double_to_hex(state.t)},
         {"config_fingerprint", config_fingerprint},
         {"source_mass_total_hex", double_to_hex(source_mass_total)},
         {"species", state.rho_i.size()},
         {"law", state.law.infinite ? "infinite" : "finite"},
         {"gamma", state.law.infinite ? 0.0 : state.law.gamma}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("write_checkpoint: cannot open manifest");
  os << j.dump(2) << "\n";
}

Checkpoint read_checkpoint(const std::filesystem::path& dir, PressureLaw law) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("read_checkpoint: no manifest in " + dir.string());
  json j = json::parse(is);
  Checkpoint cp;
  cp.step_index = j.at("step_index").get<int>();
  cp.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  cp.source_mass_total = hex_to_double(j.at("source_mass_total_hex").get<std::string>());
  std::size_t species = j.at("species").get<std::size_t>();

  std::vector<ScalarField> rho_i;
  for (std::size_t s = 0; s < species; ++s) {
    rho_i.push_back(read_field(dir / ("rho_" + std::to_string(s))));
  }
  ScalarField n = read_field(dir / "n");
  cp.state = make_species_state(rho_i, n, law);
  cp.state.t = hex_to_double(j.at("time_hex").get<std::string>());
  cp.state.p = read_field(dir / "p");  // bit-exact, not recomputed
  for (auto& r : cp.state.rho_i) r.time = cp.state.t;
  cp.state.rho.time = cp.state.t;
  cp.state.n.time = cp.state.t;
  return cp;
}

}  // namespace pmflow
