#pragma once

#include <array>
#include <optional>
#include <utility>

#include "pmflow/grid.hpp"

namespace pmflow {

// Second-order centered differences in the interior; one-sided second-order
// stencils at truncated boundaries, periodic wrap otherwise.
VectorField gradient(const ScalarField& f);

// (2d+1)-point stencil; truncated boundaries use zero ghost values so the
// operator stays symmetric (discrete integration by parts holds to roundoff).
ScalarField laplacian(const ScalarField& f);

// Hessian components: [0]=d2/dx2, [1]=d2/dxdy, [2]=d2/dy2 (unused entries are
// zero fields in 1d).
std::array<ScalarField, 3> hessian(const ScalarField& f);

// Frobenius norm of the discrete Hessian.
ScalarField hessian_norm(const ScalarField& f);

// Multilinear interpolation between cell centers; linear extrapolation within
// the half-cell margin keeps affine fields exact on the whole extent.
// Truncated mode throws on points outside [lo, hi) ("extrapolation refused").
double interpolate(const ScalarField& f, std::array<double, 2> x);
std::array<double, 2> interpolate(const VectorField& f, std::array<double, 2> x);

// Midpoint rule h^d * sum(f * weight), compensated summation in fixed cell
// order (bit-reproducible regardless of internal parallelism).
double integrate(const ScalarField& f);
double integrate(const ScalarField& f, const ScalarField& weight);

double norm_l1(const ScalarField& f);
double norm_l2(const ScalarField& f);
double norm_linf(const ScalarField& f);
double distance_l1(const ScalarField& a, const ScalarField& b);
double distance_l2(const ScalarField& a, const ScalarField& b);

struct MaximalFunctions {
  ScalarField f;  // sup_r avg_{B_r} |grad p|^2 + p |D2 p|
  ScalarField g;  // sup_r avg_{B_r} |grad p|
};

// Discrete Hardy-Littlewood-type maximal functions over dyadic radii
// {h, 2h, 4h, ...} up to r_max (default: quarter of the domain width). The
// ball of radius r holds the cells strictly within distance r of the center,
// so the radius-h ball is the cell itself and the pointwise lower bounds
// g >= |grad p| and f >= |grad p|^2 + p|D2 p| hold by construction. The sup
// over all r > 0 is approximated from below by the dyadic family.
MaximalFunctions maximal_functions(const ScalarField& p,
                                   std::optional<double> r_max = std::nullopt);

}  // namespace pmflow
