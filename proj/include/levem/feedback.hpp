#pragma once

// Velocity feedback through an amplifier of gain G that re-applies the
// pick-up voltage to one endcap. The particle sees (1 - G) of the induced
// voltage, so the resistance, friction and Johnson noise it experiences
// all scale with (1 - G), while the amplifier adds its own noise with G.

#include <cmath>
#include <string>

#include "levem/error.hpp"
#include "levem/noise_sources.hpp"

namespace levem {

struct FeedbackConfig {
  bool enabled = false;
  double gain = 0.0;
  double noise_voltage = 1e-10;  // V_fb [V]
  double amp_resistance = 50.0;  // [Ohm]
  double bandwidth = 1.0;        // [Hz]
  /// Permit G >= 1 (drives the motion instead of cooling it).
  bool allow_amplification = false;

  void validate() const {
    if (!(gain >= 0.0)) throw InvalidParameter("feedback: gain must be >= 0");
    if (gain >= 1.0 && !allow_amplification) {
      throw InvalidParameter("feedback: gain >= 1 requires allow_amplification");
    }
    if (!(noise_voltage >= 0.0)) throw InvalidParameter("feedback: noise voltage must be >= 0");
    if (!(amp_resistance > 0.0) || !(bandwidth > 0.0)) {
      throw InvalidParameter("feedback: amplifier resistance and bandwidth must be positive");
    }
  }

  double noise_temperature() const {
    return feedback_noise_temperature(noise_voltage, amp_resistance, bandwidth);
  }
};

inline double feedback_voltage(double u, double gain) { return (1.0 - gain) * u; }
inline double feedback_resistance(double r_eff, double gain) { return (1.0 - gain) * r_eff; }
inline double feedback_damping_rate(double gamma, double gain) { return (1.0 - gain) * gamma; }

/// Uncorrelated circuit and amplifier noise added in quadrature.
inline double total_noise_voltage(double v_r, double v_fb, double gain) {
  const double a = (1.0 - gain) * v_r;
  const double b = gain * v_fb;
  return std::sqrt(a * a + b * b);
}

/// T_CM = (1 - G) T_R + G^2 T_fb^n / (1 - G).
inline double equilibrium_temperature(double t_r, double t_fb_n, double gain) {
  if (!(gain < 1.0)) {
    throw DivergentTemperature("equilibrium_temperature: diverges for G >= 1 (G = " +
                               std::to_string(gain) + ")");
  }
  return (1.0 - gain) * t_r + gain * gain * t_fb_n / (1.0 - gain);
}

struct OptimalGain {
  double gain_approx = 0.0;  // 1 - sqrt(T_fb^n / T_R)
  double t_min_approx = 0.0; // 2 sqrt(T_fb^n T_R)
  double gain_exact = 0.0;   // numerical minimiser of equilibrium_temperature
  double t_min_exact = 0.0;
};

/// Golden-section minimisation of a unimodal function on [lo, hi].
template <typename F>
double golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-13, int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (hi - lo) > tol * (1.0 + std::abs(c) + std::abs(d)); ++i) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

inline OptimalGain optimal_gain(double t_r, double t_fb_n) {
  if (!(t_fb_n > 0.0)) throw InvalidParameter("optimal_gain: T_fb^n must be positive");
  if (!(t_fb_n < t_r)) {
    throw NoCoolingBenefit("optimal_gain: feedback noise temperature is not below T_R");
  }
  OptimalGain g;
  g.gain_approx = 1.0 - std::sqrt(t_fb_n / t_r);
  g.t_min_approx = 2.0 * std::sqrt(t_fb_n * t_r);
  // Work in units of T_R so the bracket tolerance is scale free.
  const double ratio = t_fb_n / t_r;
  g.gain_exact = golden_section_minimize(
      [ratio](double gain) { return equilibrium_temperature(1.0, ratio, gain); }, 0.0,
      1.0 - 1e-15);
  g.t_min_exact = equilibrium_temperature(t_r, t_fb_n, g.gain_exact);
  return g;
}

}  // namespace levem
