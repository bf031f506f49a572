#pragma once

// Analytic reference solutions used as independent test oracles. These stay in
// test code and never feed the solvers they check.

#include <cmath>

namespace pmflow::oracles {

// Self-similar source solution of d/dt rho = div(rho grad rho^gamma):
// with m = gamma + 1 the equation reads d/dt rho = (gamma/(gamma+1)) Lap rho^m,
// so rho(t, x) = v(gamma/(gamma+1) t, x) where v is the classical profile
//   v(tau, x) = tau^-alpha (C - k |x|^2 tau^{-2 beta})_+^{1/gamma},
//   beta = 1/(d gamma + 2), alpha = d beta, k = beta gamma / (2 (gamma+1)).
struct Barenblatt {
  double gamma = 2.0;
  int dim = 1;
  double big_c = 0.75;

  double beta() const { return 1.0 / (dim * gamma + 2.0); }
  double alpha() const { return dim * beta(); }
  double k() const { return beta() * gamma / (2.0 * (gamma + 1.0)); }
  double tau(double t) const { return gamma / (gamma + 1.0) * t; }

  double density(double t, double r2) const {
    double tv = tau(t);
    double inner = big_c - k() * r2 * std::pow(tv, -2.0 * beta());
    if (inner <= 0.0) return 0.0;
    return std::pow(tv, -alpha()) * std::pow(inner, 1.0 / gamma);
  }
  double pressure(double t, double r2) const {
    double tv = tau(t);
    double inner = big_c - k() * r2 * std::pow(tv, -2.0 * beta());
    if (inner <= 0.0) return 0.0;
    return std::pow(tv, -alpha() * gamma) * inner;
  }
  // constant value of gamma * Lap p inside the support: p has the parabolic
  // profile above, so Lap p = -2 d k tau^{-2 beta - alpha gamma} ... expressed
  // directly through derivatives of `pressure`.
  double gamma_lap_pressure(double t) const {
    double tv = tau(t);
    return -gamma * 2.0 * dim * k() * std::pow(tv, -alpha() * gamma - 2.0 * beta());
  }
  double support_radius(double t) const {
    return std::sqrt(big_c / k()) * std::pow(tau(t), beta());
  }
  // self-similar particle path: x(t) = x0 (t/t0)^beta
  double trajectory(double x0, double t0, double t) const {
    return x0 * std::pow(t / t0, beta());
  }
  double mass_1d() const {
    // integral of tau^{-1/4} sqrt(C - k x^2/sqrt(tau)) over the support is
    // time independent; evaluate the standard half-circle area formula
    return 0.5 * M_PI * big_c / std::sqrt(k());
  }
};

// Heat kernel evolution of Gaussian data: n0 = A exp(-x^2/(2 s0^2)) under
// dn/dt = alpha Lap n gives variance s0^2 + 2 alpha t per axis.
inline double gaussian_heat(double amplitude, double sigma0, double alpha, int dim,
                            double t, double r2) {
  double s2 = sigma0 * sigma0 + 2.0 * alpha * t;
  double scale = std::pow(sigma0 * sigma0 / s2, 0.5 * dim);
  return amplitude * scale * std::exp(-r2 / (2.0 * s2));
}

// Obstacle-problem caps with constant source b on a saturated set:
// 1d interval [-R, R]: p = b (R^2 - x^2) / 2; 2d disk radius R: b (R^2-r^2)/4.
inline double obstacle_cap_1d(double b, double R, double x) {
  double v = 0.5 * b * (R * R - x * x);
  return v > 0.0 ? v : 0.0;
}
inline double obstacle_cap_2d(double b, double R, double r) {
  double v = 0.25 * b * (R * R - r * r);
  return v > 0.0 ? v : 0.0;
}

}  // namespace pmflow::oracles
