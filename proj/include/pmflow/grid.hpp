#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace pmflow {

enum class BoundaryMode { TruncatedBuffer, Periodic };

std::string boundary_mode_name(BoundaryMode m);
BoundaryMode boundary_mode_from_name(const std::string& name);

// Uniform cell-centered Cartesian grid, d in {1,2}. For d==1 the y axis is
// collapsed to a single cell so all storage is addressed as (i,j).
struct GridSpec {
  int dim = 1;
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};
  std::array<int, 2> cells{8, 1};
  BoundaryMode boundary = BoundaryMode::TruncatedBuffer;

  static GridSpec make1d(double a, double b, int n,
                         BoundaryMode mode = BoundaryMode::TruncatedBuffer);
  static GridSpec make2d(double ax, double bx, int nx, double ay, double by,
                         int ny, BoundaryMode mode = BoundaryMode::TruncatedBuffer);

  double spacing(int axis) const {
    return (hi[axis] - lo[axis]) / static_cast<double>(cells[axis]);
  }
  double cell_volume() const {
    double v = spacing(0);
    if (dim == 2) v *= spacing(1);
    return v;
  }
  int nx() const { return cells[0]; }
  int ny() const { return cells[1]; }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(cells[0]) * static_cast<std::size_t>(cells[1]);
  }
  double center(int axis, int index) const {
    return lo[axis] + (static_cast<double>(index) + 0.5) * spacing(axis);
  }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(cells[0]) +
           static_cast<std::size_t>(i);
  }
  // Throws std::invalid_argument on violated invariants (h > 0, N >= 8).
  void validate() const;
  bool operator==(const GridSpec& o) const;
};

// Grid-sampled scalar quantity. Density-like fields are read through
// clamped_at(); values below -1e-12 violate the nonnegativity invariant.
struct ScalarField {
  GridSpec grid;
  double time = 0.0;
  std::string name;
  std::vector<double> values;

  static constexpr double kDensityFloor = -1e-12;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0, std::string nm = "");

  double& at(int i, int j) { return values[grid.index(i, j)]; }
  double at(int i, int j) const { return values[grid.index(i, j)]; }
  double clamped_at(int i, int j) const {
    double v = values[grid.index(i, j)];
    return v > 0.0 ? v : 0.0;
  }

  bool all_finite() const;
  double max_value() const;
  double min_value() const;
  double max_abs() const;
};

struct VectorField {
  GridSpec grid;
  double time = 0.0;
  std::array<std::vector<double>, 2> comp;

  VectorField() = default;
  explicit VectorField(const GridSpec& g, double fill = 0.0);

  double& at(int axis, int i, int j) { return comp[axis][grid.index(i, j)]; }
  double at(int axis, int i, int j) const { return comp[axis][grid.index(i, j)]; }
  bool all_finite() const;
  double max_norm() const;
};

// Cells between the support of f (|f| > threshold) and the nearest truncated
// boundary; returns a large sentinel when the field is empty. The support
// buffer invariant requires >= 4.
int support_buffer_cells(const ScalarField& f, double threshold);

// Largest |x| (plus half a cell) over cells with f > threshold; 0 if empty.
double support_radius(const ScalarField& f, double threshold);

}  // namespace pmflow
