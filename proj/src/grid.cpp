#include "pmflow/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmflow {

std::string boundary_mode_name(BoundaryMode m) {
  return m == BoundaryMode::Periodic ? "periodic" : "truncated";
}

BoundaryMode boundary_mode_from_name(const std::string& name) {
  if (name == "periodic") return BoundaryMode::Periodic;
  if (name == "truncated" || name == "truncated-with-buffer") {
    return BoundaryMode::TruncatedBuffer;
  }
  throw std::invalid_argument("unknown boundary mode '" + name + "'");
}

GridSpec GridSpec::make1d(double a, double b, int n, BoundaryMode mode) {
  GridSpec g;
  g.dim = 1;
  g.lo = {a, 0.0};
  g.hi = {b, 1.0};
  g.cells = {n, 1};
  g.boundary = mode;
  g.validate();
  return g;
}

GridSpec GridSpec::make2d(double ax, double bx, int nx, double ay, double by,
                          int ny, BoundaryMode mode) {
  GridSpec g;
  g.dim = 2;
  g.lo = {ax, ay};
  g.hi = {bx, by};
  g.cells = {nx, ny};
  g.boundary = mode;
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (dim != 1 && dim != 2) {
    throw std::invalid_argument("grid dimension must be 1 or 2");
  }
  for (int ax = 0; ax < dim; ++ax) {
    if (cells[ax] < 8) {
      throw std::invalid_argument("grid needs at least 8 cells per axis");
    }
    if (!(hi[ax] > lo[ax])) {
      throw std::invalid_argument("grid extent must have positive length");
    }
  }
  if (dim == 1 && cells[1] != 1) {
    throw std::invalid_argument("1d grid must collapse the y axis");
  }
}

bool GridSpec::operator==(const GridSpec& o) const {
  return dim == o.dim && lo == o.lo && hi == o.hi && cells == o.cells &&
         boundary == o.boundary;
}

ScalarField::ScalarField(const GridSpec& g, double fill, std::string nm)
    : grid(g), name(std::move(nm)), values(g.cell_count(), fill) {}

bool ScalarField::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double ScalarField::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

double ScalarField::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : values) m = std::min(m, v);
  return m;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

VectorField::VectorField(const GridSpec& g, double fill) : grid(g) {
  comp[0].assign(g.cell_count(), fill);
  comp[1].assign(g.cell_count(), fill);
}

bool VectorField::all_finite() const {
  for (int ax = 0; ax < 2; ++ax) {
    for (double v : comp[ax]) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

double VectorField::max_norm() const {
  double m = 0.0;
  for (std::size_t c = 0; c < comp[0].size(); ++c) {
    double vx = comp[0][c];
    double vy = comp[1][c];
    m = std::max(m, std::sqrt(vx * vx + vy * vy));
  }
  return m;
}

int support_buffer_cells(const ScalarField& f, double threshold) {
  const GridSpec& g = f.grid;
  int best = std::numeric_limits<int>::max();
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (std::abs(f.at(i, j)) <= threshold) continue;
      int d = std::min(i, g.nx() - 1 - i);
      if (g.dim == 2) d = std::min(d, std::min(j, g.ny() - 1 - j));
      best = std::min(best, d);
    }
  }
  return best;
}

double support_radius(const ScalarField& f, double threshold) {
  const GridSpec& g = f.grid;
  double r = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (f.at(i, j) <= threshold) continue;
      double x = g.center(0, i);
      double rr = std::abs(x) + 0.5 * g.spacing(0);
      if (g.dim == 2) {
        double y = g.center(1, j);
        rr = std::hypot(x, y) + 0.5 * g.spacing(0);
      }
      r = std::max(r, rr);
    }
  }
  return r;
}

}  // namespace pmflow
