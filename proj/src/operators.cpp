#include "pmflow/operators.hpp"

#include <cmath>
#include <stdexcept>

#include "pmflow/determinism.hpp"

namespace pmflow {

namespace {

// Value with zero ghosts outside the truncated domain, periodic wrap otherwise.
inline double sample(const ScalarField& f, int i, int j) {
  const GridSpec& g = f.grid;
  if (g.boundary == BoundaryMode::Periodic) {
    i = ((i % g.nx()) + g.nx()) % g.nx();
    j = ((j % g.ny()) + g.ny()) % g.ny();
    return f.at(i, j);
  }
  if (i < 0 || i >= g.nx() || j < 0 || j >= g.ny()) return 0.0;
  return f.at(i, j);
}

void require_finite(const ScalarField& f, const char* op) {
  if (!f.all_finite()) {
    throw std::invalid_argument(std::string(op) + ": field has non-finite values");
  }
}

}  // namespace

VectorField gradient(const ScalarField& f) {
  require_finite(f, "gradient");
  const GridSpec& g = f.grid;
  VectorField out(g, 0.0);
  out.time = f.time;
  const bool periodic = g.boundary == BoundaryMode::Periodic;

  for (int axis = 0; axis < g.dim; ++axis) {
    const double inv2h = 1.0 / (2.0 * g.spacing(axis));
    const int n = g.cells[axis];
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        int idx = axis == 0 ? i : j;
        double d;
        if (periodic || (idx > 0 && idx < n - 1)) {
          double fp = axis == 0 ? sample(f, i + 1, j) : sample(f, i, j + 1);
          double fm = axis == 0 ? sample(f, i - 1, j) : sample(f, i, j - 1);
          d = (fp - fm) * inv2h;
        } else if (idx == 0) {
          // one-sided second order: (-3 f0 + 4 f1 - f2) / (2h)
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
        out.at(axis, i, j) = d;
      }
    }
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  require_finite(f, "laplacian");
  const GridSpec& g = f.grid;
  ScalarField out(g, 0.0, f.name.empty() ? "" : "lap_" + f.name);
  out.time = f.time;
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  const double ihy2 = g.dim == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double c = f.at(i, j);
      double v = (sample(f, i - 1, j) - 2.0 * c + sample(f, i + 1, j)) * ihx2;
      if (g.dim == 2) {
        v += (sample(f, i, j - 1) - 2.0 * c + sample(f, i, j + 1)) * ihy2;
      }
      out.at(i, j) = v;
    }
  }
  return out;
}

std::array<ScalarField, 3> hessian(const ScalarField& f) {
  require_finite(f, "hessian");
  const GridSpec& g = f.grid;
  std::array<ScalarField, 3> out{ScalarField(g), ScalarField(g), ScalarField(g)};
  const double ihx2 = 1.0 / (g.spacing(0) * g.spacing(0));
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double c = f.at(i, j);
      out[0].at(i, j) = (sample(f, i - 1, j) - 2.0 * c + sample(f, i + 1, j)) * ihx2;
    }
  }
  if (g.dim == 2) {
    const double ihy2 = 1.0 / (g.spacing(1) * g.spacing(1));
    const double ihxy = 1.0 / (4.0 * g.spacing(0) * g.spacing(1));
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        double c = f.at(i, j);
        out[2].at(i, j) = (sample(f, i, j - 1) - 2.0 * c + sample(f, i, j + 1)) * ihy2;
        out[1].at(i, j) = (sample(f, i + 1, j + 1) - sample(f, i + 1, j - 1) -
                           sample(f, i - 1, j + 1) + sample(f, i - 1, j - 1)) *
                          ihxy;
      }
    }
  }
  return out;
}

ScalarField hessian_norm(const ScalarField& f) {
  auto h = hessian(f);
  ScalarField out(f.grid, 0.0, "hessian_norm");
  out.time = f.time;
  for (std::size_t c = 0; c < out.values.size(); ++c) {
    double xx = h[0].values[c];
    double xy = h[1].values[c];
    double yy = h[2].values[c];
    out.values[c] = std::sqrt(xx * xx + 2.0 * xy * xy + yy * yy);
  }
  return out;
}

namespace {

struct AxisLocation {
  int i0;
  double frac;  // may leave [0,1] within the half-cell margin (extrapolation)
};

AxisLocation locate(const GridSpec& g, int axis, double x) {
  const double h = g.spacing(axis);
  const int n = g.cells[axis];
  if (g.boundary == BoundaryMode::Periodic) {
    double span = g.hi[axis] - g.lo[axis];
    double u = std::fmod(x - g.lo[axis], span);
    if (u < 0.0) u += span;
    double s = u / h - 0.5;
    int i0 = static_cast<int>(std::floor(s));
    double frac = s - i0;
    i0 = ((i0 % n) + n) % n;
    return {i0, frac};
  }
  if (x < g.lo[axis] || x >= g.hi[axis]) {
    throw std::out_of_range("interpolate: extrapolation refused, point outside domain");
  }
  double s = (x - g.lo[axis]) / h - 0.5;
  int i0 = static_cast<int>(std::floor(s));
  if (i0 < 0) i0 = 0;
  if (i0 > n - 2) i0 = n - 2;
  return {i0, s - i0};
}

inline int wrap(const GridSpec& g, int axis, int idx) {
  if (g.boundary == BoundaryMode::Periodic) {
    int n = g.cells[axis];
    return ((idx % n) + n) % n;
  }
  return idx;
}

double interp_values(const ScalarField& f, const AxisLocation& lx,
                     const AxisLocation& ly) {
  const GridSpec& g = f.grid;
  int i1 = wrap(g, 0, lx.i0 + 1);
  if (g.dim == 1) {
    return f.at(lx.i0, 0) * (1.0 - lx.frac) + f.at(i1, 0) * lx.frac;
  }
  int j1 = wrap(g, 1, ly.i0 + 1);
  double v00 = f.at(lx.i0, ly.i0);
  double v10 = f.at(i1, ly.i0);
  double v01 = f.at(lx.i0, j1);
  double v11 = f.at(i1, j1);
  double a = v00 * (1.0 - lx.frac) + v10 * lx.frac;
  double b = v01 * (1.0 - lx.frac) + v11 * lx.frac;
  return a * (1.0 - ly.frac) + b * ly.frac;
}

}  // namespace

double interpolate(const ScalarField& f, std::array<double, 2> x) {
  AxisLocation lx = locate(f.grid, 0, x[0]);
  AxisLocation ly{0, 0.0};
  if (f.grid.dim == 2) ly = locate(f.grid, 1, x[1]);
  return interp_values(f, lx, ly);
}

std::array<double, 2> interpolate(const VectorField& f, std::array<double, 2> x) {
  AxisLocation lx = locate(f.grid, 0, x[0]);
  AxisLocation ly{0, 0.0};
  if (f.grid.dim == 2) ly = locate(f.grid, 1, x[1]);
  std::array<double, 2> out{0.0, 0.0};
  for (int axis = 0; axis < f.grid.dim; ++axis) {
    const GridSpec& g = f.grid;
    int i1 = wrap(g, 0, lx.i0 + 1);
    if (g.dim == 1) {
      out[axis] = f.at(axis, lx.i0, 0) * (1.0 - lx.frac) + f.at(axis, i1, 0) * lx.frac;
    } else {
      int j1 = wrap(g, 1, ly.i0 + 1);
      double a = f.at(axis, lx.i0, ly.i0) * (1.0 - lx.frac) + f.at(axis, i1, ly.i0) * lx.frac;
      double b = f.at(axis, lx.i0, j1) * (1.0 - lx.frac) + f.at(axis, i1, j1) * lx.frac;
      out[axis] = a * (1.0 - ly.frac) + b * ly.frac;
    }
  }
  return out;
}

double integrate(const ScalarField& f) {
  KahanAccumulator acc;
  for (double v : f.values) acc.add(v);
  return acc.value() * f.grid.cell_volume();
}

double integrate(const ScalarField& f, const ScalarField& weight) {
  if (!(f.grid == weight.grid)) {
    throw std::invalid_argument("integrate: mismatched grids");
  }
  KahanAccumulator acc;
  for (std::size_t c = 0; c < f.values.size(); ++c) {
    acc.add(f.values[c] * weight.values[c]);
  }
  return acc.value() * f.grid.cell_volume();
}

double norm_l1(const ScalarField& f) {
  KahanAccumulator acc;
  for (double v : f.values) acc.add(std::abs(v));
  return acc.value() * f.grid.cell_volume();
}

double norm_l2(const ScalarField& f) {
  KahanAccumulator acc;
  for (double v : f.values) acc.add(v * v);
  return std::sqrt(acc.value() * f.grid.cell_volume());
}

double norm_linf(const ScalarField& f) { return f.max_abs(); }

double distance_l1(const ScalarField& a, const ScalarField& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("distance_l1: mismatched grids");
  KahanAccumulator acc;
  for (std::size_t c = 0; c < a.values.size(); ++c) {
    acc.add(std::abs(a.values[c] - b.values[c]));
  }
  return acc.value() * a.grid.cell_volume();
}

double distance_l2(const ScalarField& a, const ScalarField& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("distance_l2: mismatched grids");
  KahanAccumulator acc;
  for (std::size_t c = 0; c < a.values.size(); ++c) {
    double d = a.values[c] - b.values[c];
    acc.add(d * d);
  }
  return std::sqrt(acc.value() * a.grid.cell_volume());
}

MaximalFunctions maximal_functions(const ScalarField& p, std::optional<double> r_max) {
  require_finite(p, "maximal_functions");
  const GridSpec& g = p.grid;
  double width = g.hi[0] - g.lo[0];
  if (g.dim == 2) width = std::min(width, g.hi[1] - g.lo[1]);
  const double rmax = r_max.value_or(0.25 * width);

  VectorField grad = gradient(p);
  ScalarField hn = hessian_norm(p);
  ScalarField integrand_f(g), integrand_g(g);
  for (std::size_t c = 0; c < p.values.size(); ++c) {
    double gx = grad.comp[0][c];
    double gy = grad.comp[1][c];
    double gn2 = gx * gx + gy * gy;
    double pv = p.values[c] > 0.0 ? p.values[c] : 0.0;
    integrand_f.values[c] = gn2 + pv * hn.values[c];
    integrand_g.values[c] = std::sqrt(gn2);
  }

  // Offset masks for dyadic radii; the ball holds cells strictly within r, so
  // r = h is the singleton cell.
  struct Mask {
    std::vector<std::array<int, 2>> offsets;
  };
  std::vector<Mask> masks;
  const double hx = g.spacing(0);
  const double hy = g.dim == 2 ? g.spacing(1) : hx;
  const double hmin = std::min(hx, hy);
  for (double r = hmin; r <= rmax * (1.0 + 1e-12); r *= 2.0) {
    Mask m;
    int ri = static_cast<int>(std::ceil(r / hx));
    int rj = g.dim == 2 ? static_cast<int>(std::ceil(r / hy)) : 0;
    for (int dj = -rj; dj <= rj; ++dj) {
      for (int di = -ri; di <= ri; ++di) {
        double dist2 = di * hx * di * hx + dj * hy * dj * hy;
        if (dist2 < r * r) m.offsets.push_back({di, dj});
      }
    }
    masks.push_back(std::move(m));
  }

  MaximalFunctions out{ScalarField(g, 0.0, "maximal_f"), ScalarField(g, 0.0, "maximal_g")};
  out.f.time = p.time;
  out.g.time = p.time;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      double best_f = 0.0, best_g = 0.0;
      for (const Mask& m : masks) {
        KahanAccumulator af, ag;
        for (const auto& off : m.offsets) {
          af.add(sample(integrand_f, i + off[0], j + off[1]));
          ag.add(sample(integrand_g, i + off[0], j + off[1]));
        }
        double inv = 1.0 / static_cast<double>(m.offsets.size());
        best_f = std::max(best_f, af.value() * inv);
        best_g = std::max(best_g, ag.value() * inv);
      }
      out.f.at(i, j) = best_f;
      out.g.at(i, j) = best_g;
    }
  }
  return out;
}

}  // namespace pmflow
