#include "pmflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pmflow/operators.hpp"

namespace pmflow {

std::array<double, 2> PerturbedVelocity::velocity(double t,
                                                  std::array<double, 2> x) const {
  auto v = history_->velocity(t, x);
  auto wv = interpolate(*w_, x);
  return {v[0] + epsilon_ * wv[0], v[1] + epsilon_ * wv[1]};
}

double PerturbedVelocity::max_speed() const {
  return history_->max_speed() + std::abs(epsilon_) * w_->max_norm();
}

double ParticleEnsemble::total_weight() const {
  KahanAccumulator acc;
  for (double v : w) acc.add(v);
  return acc.value();
}

ParticleEnsemble seed_ensemble(const SpeciesState& state, double threshold_rel) {
  const GridSpec& g = state.grid();
  const double thr = threshold_rel * std::max(state.rho.max_value(), 0.0);
  const double vol = g.cell_volume();

  ParticleEnsemble ens;
  ens.s = state.t;
  ens.t_now = state.t;
  ens.seed_grid = g;
  ens.w_species.resize(state.species_count());
  ens.growth_int.resize(state.species_count());
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double r = state.rho.at(i, j);
      if (r <= thr) continue;
      std::array<double, 2> x{g.center(0, i), g.dim == 2 ? g.center(1, j) : 0.0};
      ens.seeds.push_back(x);
      ens.pos.push_back(x);
      ens.w.push_back(r * vol);
      for (std::size_t s = 0; s < state.species_count(); ++s) {
        ens.w_species[s].push_back(state.rho_i[s].at(i, j) * vol);
        ens.growth_int[s].push_back(0.0);
      }
      ens.p_start.push_back(state.p.at(i, j));
      ens.p_ledger.push_back(0.0);
    }
  }
  return ens;
}

ParticleEnsemble seed_ensemble_weighted(const ScalarField& weight_field, double s,
                                        double threshold_rel) {
  const GridSpec& g = weight_field.grid;
  const double thr = threshold_rel * std::max(weight_field.max_value(), 0.0);
  const double vol = g.cell_volume();
  ParticleEnsemble ens;
  ens.s = s;
  ens.t_now = s;
  ens.seed_grid = g;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double r = weight_field.at(i, j);
      if (r <= thr) continue;
      std::array<double, 2> x{g.center(0, i), g.dim == 2 ? g.center(1, j) : 0.0};
      ens.seeds.push_back(x);
      ens.pos.push_back(x);
      ens.w.push_back(r * vol);
      ens.p_start.push_back(0.0);
      ens.p_ledger.push_back(0.0);
    }
  }
  return ens;
}

namespace {

void check_inside(const GridSpec& g, const std::array<double, 2>& x) {
  if (g.boundary == BoundaryMode::Periodic) return;
  if (x[0] < g.lo[0] || x[0] >= g.hi[0] ||
      (g.dim == 2 && (x[1] < g.lo[1] || x[1] >= g.hi[1]))) {
    throw std::runtime_error("flow map: particle exited the buffered domain");
  }
}

FlowMapRecord advance_impl(const ParticleEnsemble& ens, const VelocitySource& vel,
                           double duration, const FlowAdvanceOptions& opts,
                           bool forward) {
  if (duration < 0.0) throw std::invalid_argument("flow duration must be >= 0");
  FlowMapRecord rec;
  rec.direction = forward ? FlowDirection::Forward : FlowDirection::Backward;
  rec.s = ens.s;
  rec.t = duration;
  rec.ensemble = ens;
  if (duration == 0.0 || ens.size() == 0) return rec;

  const GridSpec& g = ens.seed_grid;
  double h = g.spacing(0);
  if (g.dim == 2) h = std::min(h, g.spacing(1));
  double vmax = std::max(vel.max_speed(), 1e-12);
  double dt_p = opts.cfl * h / vmax;
  if (opts.history != nullptr) dt_p = std::min(dt_p, opts.history->min_slice_gap());
  int nsteps = std::max(1, static_cast<int>(std::ceil(duration / dt_p - 1e-12)));
  double dt = duration / static_cast<double>(nsteps);
  rec.particle_dt = dt;

  const bool carry = opts.model != nullptr && opts.history != nullptr;
  const bool ledger = carry && opts.law != nullptr && !opts.law->infinite && forward;

  ParticleEnsemble& e = rec.ensemble;
  for (int k = 0; k < nsteps; ++k) {
    double tau = forward ? ens.s + k * dt : ens.s - k * dt;
    double tau_mid = forward ? tau + 0.5 * dt : tau - 0.5 * dt;
    for (std::size_t j = 0; j < e.pos.size(); ++j) {
      std::array<double, 2> x = e.pos[j];
      auto v1 = vel.velocity(tau, x);
      double sgn = forward ? 1.0 : -1.0;
      std::array<double, 2> xm{x[0] + 0.5 * dt * sgn * v1[0],
                               x[1] + 0.5 * dt * sgn * v1[1]};
      check_inside(g, xm);
      auto v2 = vel.velocity(tau_mid, xm);
      std::array<double, 2> xn{x[0] + dt * sgn * v2[0], x[1] + dt * sgn * v2[1]};
      check_inside(g, xn);
      e.pos[j] = xn;

      if (carry && forward) {
        double pm = opts.history->pressure(tau_mid, xm);
        double nm = opts.history->nutrient(tau_mid, xm);
        pm = pm > 0.0 ? pm : 0.0;
        nm = nm > 0.0 ? nm : 0.0;
        for (std::size_t s = 0; s < e.growth_int.size(); ++s) {
          e.growth_int[s][j] += dt * opts.model->growth(s, pm, nm);
        }
        if (ledger) {
          e.p_ledger[j] += dt * opts.history->pressure_rate(tau_mid, xm);
        }
      }
    }
  }
  e.t_now = forward ? ens.s + duration : ens.s - duration;
  return rec;
}

}  // namespace

FlowMapRecord advance_forward(const ParticleEnsemble& ens, const VelocitySource& vel,
                              double duration, const FlowAdvanceOptions& opts) {
  return advance_impl(ens, vel, duration, opts, true);
}

FlowMapRecord advance_backward(const ParticleEnsemble& ens, const VelocitySource& vel,
                               double duration, const FlowAdvanceOptions& opts) {
  return advance_impl(ens, vel, duration, opts, false);
}

namespace {

struct CicStencil {
  int idx[2];     // base cell index per axis
  double frac[2];
};

CicStencil cic_locate(const GridSpec& g, const std::array<double, 2>& x) {
  CicStencil st{{0, 0}, {0.0, 0.0}};
  for (int ax = 0; ax < g.dim; ++ax) {
    const double h = g.spacing(ax);
    const int n = g.cells[ax];
    double s;
    if (g.boundary == BoundaryMode::Periodic) {
      double span = g.hi[ax] - g.lo[ax];
      double u = std::fmod(x[ax] - g.lo[ax], span);
      if (u < 0.0) u += span;
      s = u / h - 0.5;
      int i0 = static_cast<int>(std::floor(s));
      st.frac[ax] = s - i0;
      st.idx[ax] = ((i0 % n) + n) % n;
    } else {
      s = (x[ax] - g.lo[ax]) / h - 0.5;
      int i0 = static_cast<int>(std::floor(s));
      if (i0 < 0) i0 = 0;
      if (i0 > n - 2) i0 = n - 2;
      st.frac[ax] = s - i0;
      st.idx[ax] = i0;
    }
  }
  return st;
}

inline int wrap_idx(const GridSpec& g, int axis, int i) {
  if (g.boundary == BoundaryMode::Periodic) {
    int n = g.cells[axis];
    return ((i % n) + n) % n;
  }
  return i;
}

void cic_deposit(ScalarField& field, const std::array<double, 2>& x, double weight) {
  const GridSpec& g = field.grid;
  CicStencil st = cic_locate(g, x);
  const double inv_vol = 1.0 / g.cell_volume();
  int i1 = wrap_idx(g, 0, st.idx[0] + 1);
  if (g.dim == 1) {
    field.at(st.idx[0], 0) += weight * (1.0 - st.frac[0]) * inv_vol;
    field.at(i1, 0) += weight * st.frac[0] * inv_vol;
    return;
  }
  int j1 = wrap_idx(g, 1, st.idx[1] + 1);
  double fx = st.frac[0], fy = st.frac[1];
  field.at(st.idx[0], st.idx[1]) += weight * (1.0 - fx) * (1.0 - fy) * inv_vol;
  field.at(i1, st.idx[1]) += weight * fx * (1.0 - fy) * inv_vol;
  field.at(st.idx[0], j1) += weight * (1.0 - fx) * fy * inv_vol;
  field.at(i1, j1) += weight * fx * fy * inv_vol;
}

}  // namespace

ScalarField deposit(const ParticleEnsemble& ens, const GridSpec& grid) {
  ScalarField out(grid, 0.0, "deposit");
  out.time = ens.t_now;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    cic_deposit(out, ens.pos[j], ens.w[j]);
  }
  return out;
}

ScalarField deposit_species(const ParticleEnsemble& ens, std::size_t species,
                            const GridSpec& grid) {
  if (species >= ens.w_species.size()) {
    throw std::out_of_range("deposit_species: bad species index");
  }
  ScalarField out(grid, 0.0, "deposit_species");
  out.time = ens.t_now;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    double w = ens.w_species[species][j] * std::exp(ens.growth_int[species][j]);
    cic_deposit(out, ens.pos[j], w);
  }
  return out;
}

double reconstruct_species(const ParticleEnsemble& ens, std::size_t species,
                           const std::function<double(std::array<double, 2>)>& phi) {
  if (species >= ens.w_species.size()) {
    throw std::out_of_range("reconstruct_species: bad species index");
  }
  KahanAccumulator acc;
  for (std::size_t j = 0; j < ens.size(); ++j) {
    acc.add(ens.w_species[species][j] * phi(ens.pos[j]) *
            std::exp(ens.growth_int[species][j]));
  }
  return acc.value();
}

namespace {

// Displacement of a flow map as masked grid fields over its seed cells.
struct MapField {
  GridSpec grid;
  std::vector<double> dx, dy;
  std::vector<char> mask;
};

MapField build_map_field(const FlowMapRecord& rec) {
  const GridSpec& g = rec.ensemble.seed_grid;
  MapField mf{g, std::vector<double>(g.cell_count(), 0.0),
              std::vector<double>(g.cell_count(), 0.0),
              std::vector<char>(g.cell_count(), 0)};
  for (std::size_t j = 0; j < rec.ensemble.size(); ++j) {
    const auto& seed = rec.ensemble.seeds[j];
    // recover the seed cell index from the center coordinates
    int i = static_cast<int>(std::floor((seed[0] - g.lo[0]) / g.spacing(0)));
    int jj = g.dim == 2
                 ? static_cast<int>(std::floor((seed[1] - g.lo[1]) / g.spacing(1)))
                 : 0;
    std::size_t c = g.index(i, jj);
    mf.dx[c] = rec.ensemble.pos[j][0] - seed[0];
    mf.dy[c] = rec.ensemble.pos[j][1] - seed[1];
    mf.mask[c] = 1;
  }
  return mf;
}

// Mask-aware bilinear interpolation of the displacement; nullopt when the
// stencil has no seeded cell.
std::optional<std::array<double, 2>> interp_map(const MapField& mf,
                                                const std::array<double, 2>& x) {
  const GridSpec& g = mf.grid;
  if (g.boundary != BoundaryMode::Periodic) {
    if (x[0] < g.lo[0] || x[0] >= g.hi[0]) return std::nullopt;
    if (g.dim == 2 && (x[1] < g.lo[1] || x[1] >= g.hi[1])) return std::nullopt;
  }
  CicStencil st = cic_locate(g, x);
  int is[2] = {st.idx[0], wrap_idx(g, 0, st.idx[0] + 1)};
  int js[2] = {0, 0};
  double wx[2] = {1.0 - st.frac[0], st.frac[0]};
  double wy[2] = {1.0, 0.0};
  if (g.dim == 2) {
    js[0] = st.idx[1];
    js[1] = wrap_idx(g, 1, st.idx[1] + 1);
    wy[0] = 1.0 - st.frac[1];
    wy[1] = st.frac[1];
  }
  double total = 0.0, ax = 0.0, ay = 0.0;
  const int ny = g.dim == 2 ? 2 : 1;
  for (int b = 0; b < ny; ++b) {
    for (int a = 0; a < 2; ++a) {
      std::size_t c = g.index(is[a], js[b]);
      if (!mf.mask[c]) continue;
      double w = wx[a] * wy[b];
      if (w < 0.0) w = 0.0;  // clamped margins can give tiny negatives
      total += w;
      ax += w * mf.dx[c];
      ay += w * mf.dy[c];
    }
  }
  if (total < 0.25) return std::nullopt;
  return std::array<double, 2>{ax / total, ay / total};
}

}  // namespace

ResidualReport check_inversion(const FlowMapRecord& forward,
                               const FlowMapRecord& backward) {
  if (forward.direction != FlowDirection::Forward ||
      backward.direction != FlowDirection::Backward) {
    throw std::invalid_argument("check_inversion wants a forward and a backward record");
  }
  MapField xmap = build_map_field(forward);
  ResidualReport rep;
  rep.h = forward.ensemble.seed_grid.spacing(0);
  rep.dt = std::max(forward.particle_dt, backward.particle_dt);
  KahanAccumulator res, wsum;
  const ParticleEnsemble& ye = backward.ensemble;
  for (std::size_t j = 0; j < ye.size(); ++j) {
    auto disp = interp_map(xmap, ye.pos[j]);
    if (!disp) {
      ++rep.particles_skipped;
      continue;
    }
    double cx = ye.pos[j][0] + (*disp)[0] - ye.seeds[j][0];
    double cy = ye.pos[j][1] + (*disp)[1] - ye.seeds[j][1];
    res.add(ye.w[j] * std::hypot(cx, cy));
    wsum.add(ye.w[j]);
    ++rep.particles_used;
  }
  rep.weighted_l1 = res.value();
  rep.total_weight = wsum.value();
  return rep;
}

ResidualReport check_semigroup(const FlowMapRecord& direct,
                               const FlowMapRecord& first_leg,
                               const FlowMapRecord& second_leg) {
  if (direct.ensemble.size() != first_leg.ensemble.size()) {
    throw std::invalid_argument("check_semigroup: direct and first leg must share seeds");
  }
  MapField leg2 = build_map_field(second_leg);
  ResidualReport rep;
  rep.h = direct.ensemble.seed_grid.spacing(0);
  rep.dt = std::max(direct.particle_dt,
                    std::max(first_leg.particle_dt, second_leg.particle_dt));
  KahanAccumulator res, wsum;
  for (std::size_t j = 0; j < direct.ensemble.size(); ++j) {
    const auto& mid = first_leg.ensemble.pos[j];
    auto disp = interp_map(leg2, mid);
    if (!disp) {
      ++rep.particles_skipped;
      continue;
    }
    double cx = mid[0] + (*disp)[0] - direct.ensemble.pos[j][0];
    double cy = mid[1] + (*disp)[1] - direct.ensemble.pos[j][1];
    res.add(direct.ensemble.w[j] * std::hypot(cx, cy));
    wsum.add(direct.ensemble.w[j]);
    ++rep.particles_used;
  }
  rep.weighted_l1 = res.value();
  rep.total_weight = wsum.value();
  return rep;
}

std::vector<std::vector<double>> mixing_metric(const SpeciesState& state) {
  const std::size_t l = state.species_count();
  std::vector<std::vector<double>> m(l, std::vector<double>(l, 0.0));
  const double vol = state.grid().cell_volume();
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t b = a + 1; b < l; ++b) {
      KahanAccumulator acc;
      for (std::size_t c = 0; c < state.rho.values.size(); ++c) {
        acc.add(std::min(std::max(state.rho_i[a].values[c], 0.0),
                         std::max(state.rho_i[b].values[c], 0.0)));
      }
      m[a][b] = m[b][a] = acc.value() * vol;
    }
  }
  return m;
}

void export_trajectories(const std::filesystem::path& csv,
                         const std::vector<FlowMapRecord>& records) {
  std::ofstream os(csv);
  if (!os) throw std::runtime_error("export_trajectories: cannot open " + csv.string());
  os << "record,direction,s,t,particle,seed_x,seed_y,x,y,weight,p_ledger";
  std::size_t max_species = 0;
  for (const auto& r : records) {
    max_species = std::max(max_species, r.ensemble.growth_int.size());
  }
  for (std::size_t s = 0; s < max_species; ++s) os << ",growth_int_" << s;
  os << "\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    for (std::size_t j = 0; j < rec.ensemble.size(); ++j) {
      os << r << ','
         << (rec.direction == FlowDirection::Forward ? "forward" : "backward") << ','
         << num(rec.s) << ',' << num(rec.t) << ',' << j << ','
         << num(rec.ensemble.seeds[j][0]) << ',' << num(rec.ensemble.seeds[j][1]) << ','
         << num(rec.ensemble.pos[j][0]) << ',' << num(rec.ensemble.pos[j][1]) << ','
         << num(rec.ensemble.w[j]) << ',' << num(rec.ensemble.p_ledger[j]);
      for (std::size_t s = 0; s < max_species; ++s) {
        double v = s < rec.ensemble.growth_int.size() ? rec.ensemble.growth_int[s][j] : 0.0;
        os << ',' << num(v);
      }
      os << "\n";
    }
  }
}

}  // namespace pmflow
