#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pmflow/field_io.hpp"
#include "pmflow/grid.hpp"
#include "pmflow/operators.hpp"
#include "support/oracles.hpp"

using namespace pmflow;

namespace {

ScalarField fill_1d(const GridSpec& g, double (*f)(double)) {
  ScalarField out(g);
  for (int i = 0; i < g.nx(); ++i) out.at(i, 0) = f(g.center(0, i));
  return out;
}

}  // namespace

TEST_CASE("grid invariants") {
  CHECK_THROWS(GridSpec::make1d(0.0, 1.0, 4));   // N >= 8
  CHECK_THROWS(GridSpec::make1d(1.0, 0.0, 16));  // positive extent
  GridSpec g = GridSpec::make1d(0.0, 1.0, 16);
  CHECK(g.spacing(0) == doctest::Approx(1.0 / 16));
  CHECK(g.cell_count() == 16);
}

TEST_CASE("gradient: constant field is flat") {
  GridSpec g = GridSpec::make1d(-1.0, 1.0, 32);
  ScalarField f(g, 3.25);
  VectorField grad = gradient(f);
  for (int i = 0; i < g.nx(); ++i) CHECK(grad.at(0, i, 0) == 0.0);
}

TEST_CASE("gradient: exact on linear and quadratic fields") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 64);
  ScalarField lin = fill_1d(g, [](double x) { return 3.0 * x; });
  VectorField glin = gradient(lin);
  for (int i = 0; i < g.nx(); ++i) {
    CHECK(glin.at(0, i, 0) == doctest::Approx(3.0).epsilon(1e-13));
  }
  ScalarField quad = fill_1d(g, [](double x) { return x * x; });
  VectorField gquad = gradient(quad);
  for (int i = 1; i < g.nx() - 1; ++i) {
    CHECK(gquad.at(0, i, 0) == doctest::Approx(2.0 * g.center(0, i)).epsilon(1e-12));
  }
}

TEST_CASE("laplacian: constants and quadratics") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 64);
  ScalarField c(g, 7.0);
  // zero-ghost boundary rows are not meaningful for a non-decaying field;
  // check the interior
  ScalarField lc = laplacian(c);
  for (int i = 1; i < g.nx() - 1; ++i) CHECK(lc.at(i, 0) == 0.0);
  ScalarField quad = fill_1d(g, [](double x) { return x * x; });
  ScalarField lq = laplacian(quad);
  for (int i = 1; i < g.nx() - 1; ++i) {
    CHECK(lq.at(i, 0) == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("laplacian: Barenblatt pressure cap is flat inside its support") {
  oracles::Barenblatt bb;         // gamma 2, d = 1
  const double t = 1.0;
  GridSpec g = GridSpec::make1d(-8.0, 8.0, 512);
  ScalarField p(g);
  for (int i = 0; i < g.nx(); ++i) {
    double x = g.center(0, i);
    p.at(i, 0) = bb.pressure(t, x * x);
  }
  ScalarField lap = laplacian(p);
  const double expected = bb.gamma_lap_pressure(t) / bb.gamma;
  const double radius = bb.support_radius(t);
  int inside = 0;
  for (int i = 0; i < g.nx(); ++i) {
    double x = g.center(0, i);
    if (std::abs(x) < radius - 2.0 * g.spacing(0)) {
      ++inside;
      CHECK(lap.at(i, 0) == doctest::Approx(expected).epsilon(1e-8));
      CHECK(lap.at(i, 0) < 0.0);
    }
  }
  CHECK(inside > 100);
  // support cell count matches the analytic radius within one cell
  double measured = support_radius(p, 1e-14);
  CHECK(std::abs(measured - radius) <= 1.5 * g.spacing(0));
}

TEST_CASE("interpolate: nodes, affine precision, quadratic midpoint") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 32);
  ScalarField f = fill_1d(g, [](double x) { return 2.0 + 0.5 * x; });
  CHECK(interpolate(f, {g.center(0, 7), 0.0}) == doctest::Approx(f.at(7, 0)));
  for (double x : {0.013, 0.33, 0.501, 0.97}) {
    CHECK(interpolate(f, {x, 0.0}) == doctest::Approx(2.0 + 0.5 * x).epsilon(1e-13));
  }
  ScalarField q = fill_1d(g, [](double x) { return x * x; });
  double xm = 0.5 * (g.center(0, 10) + g.center(0, 11));  // cell-edge midpoint
  double direct = 0.5 * (q.at(10, 0) + q.at(11, 0));
  CHECK(interpolate(q, {xm, 0.0}) == doctest::Approx(direct).epsilon(1e-14));
  CHECK_THROWS(interpolate(q, {1.5, 0.0}));  // extrapolation refused
}

TEST_CASE("interpolate: periodic wrap") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 16, BoundaryMode::Periodic);
  ScalarField f(g);
  for (int i = 0; i < g.nx(); ++i) f.at(i, 0) = std::sin(2.0 * M_PI * g.center(0, i));
  CHECK(interpolate(f, {1.25, 0.0}) == doctest::Approx(interpolate(f, {0.25, 0.0})));
}

TEST_CASE("integrate: exact cases and sin oracle") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 128);
  ScalarField one(g, 1.0);
  CHECK(integrate(one) == doctest::Approx(1.0).epsilon(1e-15));
  ScalarField half(g, 0.0);
  for (int i = 0; i < 64; ++i) half.at(i, 0) = 1.0;
  CHECK(integrate(half) == doctest::Approx(0.5).epsilon(1e-15));

  GridSpec g2 = GridSpec::make1d(0.0, 1.0, 256);
  ScalarField s = fill_1d(g2, [](double x) { return std::sin(M_PI * x); });
  CHECK(std::abs(integrate(s) - 2.0 / M_PI) < 1e-4);
}

TEST_CASE("operators are linear") {
  GridSpec g = GridSpec::make1d(-2.0, 2.0, 64);
  ScalarField f = fill_1d(g, [](double x) { return std::exp(-x * x); });
  ScalarField h = fill_1d(g, [](double x) { return std::cos(3.0 * x); });
  const double a = 1.7, b = -0.3;
  ScalarField combo(g);
  for (std::size_t c = 0; c < combo.values.size(); ++c) {
    combo.values[c] = a * f.values[c] + b * h.values[c];
  }
  VectorField gc = gradient(combo), gf = gradient(f), gh = gradient(h);
  ScalarField lc = laplacian(combo), lf = laplacian(f), lh = laplacian(h);
  for (std::size_t c = 0; c < combo.values.size(); ++c) {
    CHECK(gc.comp[0][c] ==
          doctest::Approx(a * gf.comp[0][c] + b * gh.comp[0][c]).epsilon(1e-12));
    CHECK(lc.values[c] ==
          doctest::Approx(a * lf.values[c] + b * lh.values[c]).epsilon(1e-12));
  }
}

TEST_CASE("discrete integration by parts") {
  GridSpec g = GridSpec::make1d(-4.0, 4.0, 128);
  // both fields vanish near the truncated boundary
  ScalarField f = fill_1d(g, [](double x) { return std::exp(-2.0 * x * x); });
  ScalarField h = fill_1d(g, [](double x) { return x * std::exp(-x * x); });
  double lhs = integrate(f, laplacian(h));
  double rhs = integrate(h, laplacian(f));
  CHECK(std::abs(lhs - rhs) <= 1e-10 * norm_l2(f) * norm_l2(h));
}

TEST_CASE("gradient convergence order on sin(2 pi x)") {
  auto err = [](int n) {
    GridSpec g = GridSpec::make1d(0.0, 1.0, n, BoundaryMode::Periodic);
    ScalarField f(g);
    for (int i = 0; i < n; ++i) f.at(i, 0) = std::sin(2.0 * M_PI * g.center(0, i));
    VectorField grad = gradient(f);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      double exact = 2.0 * M_PI * std::cos(2.0 * M_PI * g.center(0, i));
      worst = std::max(worst, std::abs(grad.at(0, i, 0) - exact));
    }
    return worst;
  };
  double ratio = err(64) / err(128);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("maximal functions: trivial and affine cases") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 64);
  ScalarField zero(g, 0.0);
  MaximalFunctions mz = maximal_functions(zero);
  CHECK(mz.f.max_abs() == 0.0);
  CHECK(mz.g.max_abs() == 0.0);

  const double slope = 0.75;
  ScalarField aff(g);
  for (int i = 0; i < g.nx(); ++i) aff.at(i, 0) = 1.0 + slope * g.center(0, i);
  MaximalFunctions ma = maximal_functions(aff);
  // far from the boundary the ball averages of the constant |grad p| equal it
  CHECK(ma.g.at(g.nx() / 2, 0) == doctest::Approx(slope).epsilon(1e-12));
}

TEST_CASE("maximal functions dominate the pointwise integrand") {
  GridSpec g = GridSpec::make1d(-2.0, 2.0, 128);
  ScalarField p(g);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  double a1 = amp(rng), a2 = amp(rng);
  for (int i = 0; i < g.nx(); ++i) {
    double x = g.center(0, i);
    p.at(i, 0) = a1 * std::exp(-x * x) + a2 * std::exp(-2.0 * (x - 0.5) * (x - 0.5));
  }
  VectorField grad = gradient(p);
  ScalarField hn = hessian_norm(p);
  MaximalFunctions m = maximal_functions(p);
  for (int i = 0; i < g.nx(); ++i) {
    double gp = std::abs(grad.at(0, i, 0));
    CHECK(m.g.at(i, 0) >= gp - 1e-14);
    CHECK(m.f.at(i, 0) >= gp * gp + p.at(i, 0) * hn.at(i, 0) - 1e-14);
  }
}

TEST_CASE("field snapshot round trip") {
  GridSpec g = GridSpec::make2d(-1.0, 1.0, 16, 0.0, 2.0, 8);
  ScalarField f(g, 0.0, "rho");
  f.time = 0.625;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : f.values) v = u(rng);

  auto dir = std::filesystem::temp_directory_path() / "pmflow_field_io_test";
  std::filesystem::create_directories(dir);
  write_field(dir / "snap", f);
  ScalarField back = read_field(dir / "snap");
  CHECK(back.name == "rho");
  CHECK(back.time == f.time);
  REQUIRE(back.values.size() == f.values.size());
  for (std::size_t c = 0; c < f.values.size(); ++c) CHECK(back.values[c] == f.values[c]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("support buffer accounting") {
  GridSpec g = GridSpec::make1d(0.0, 1.0, 32);
  ScalarField f(g, 0.0);
  f.at(16, 0) = 1.0;
  CHECK(support_buffer_cells(f, 0.0) == 15);
  f.at(2, 0) = 1.0;
  CHECK(support_buffer_cells(f, 0.0) == 2);
}
