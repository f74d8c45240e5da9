#pragma once

// Floquet analysis of the Paul-trap equation of motion
//
//   z'' = (w_D^2 / 4) (a - 2 q cos(w_D t)) z
//
// In the scaled time tau = w_D t / 2 this is y'' = (a - 2 q cos 2 tau) y,
// which has period pi. The monodromy matrix over one period has unit
// determinant, so the motion is bounded iff |trace| < 2.

#include <array>
#include <cmath>

#include "levem/units.hpp"

namespace levem {

/// Upper edge of the lowest Mathieu stability region on the a = 0 axis.
inline constexpr double kMathieuQBoundary = 0.908046;

struct FloquetResult {
  double trace = 0.0;
  bool stable = false;
  /// Characteristic exponent in [0, 1]; secular frequency is beta * w_D / 2.
  /// NaN when unstable.
  double beta = 0.0;
};

namespace detail {

inline std::array<double, 2> mathieu_rhs(double tau, const std::array<double, 2>& y,
                                         double a, double q) {
  return {y[1], (a - 2.0 * q * std::cos(2.0 * tau)) * y[0]};
}

inline std::array<double, 2> mathieu_propagate(std::array<double, 2> y, double a, double q,
                                               int steps) {
  const double h = kPi / steps;
  double tau = 0.0;
  for (int i = 0; i < steps; ++i) {
    const auto k1 = mathieu_rhs(tau, y, a, q);
    const auto k2 = mathieu_rhs(tau + 0.5 * h, {y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]}, a, q);
    const auto k3 = mathieu_rhs(tau + 0.5 * h, {y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]}, a, q);
    const auto k4 = mathieu_rhs(tau + h, {y[0] + h * k3[0], y[1] + h * k3[1]}, a, q);
    y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    tau += h;
  }
  return y;
}

}  // namespace detail

/// Monodromy trace and characteristic exponent for the stability
/// parameters (a, q) in the sign convention above.
inline FloquetResult mathieu_floquet(double a, double q, int steps = 2000) {
  const auto c1 = detail::mathieu_propagate({1.0, 0.0}, a, q, steps);
  const auto c2 = detail::mathieu_propagate({0.0, 1.0}, a, q, steps);
  FloquetResult r;
  r.trace = c1[0] + c2[1];
  r.stable = std::abs(r.trace) < 2.0;
  r.beta = r.stable ? std::acos(0.5 * r.trace) / kPi : std::nan("");
  return r;
}

}  // namespace levem
