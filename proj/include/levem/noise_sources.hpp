#pragma once

// Discrete-time stochastic forces. Every channel is delta-correlated white
// noise; over one step of length dt it is represented by an independent
// Gaussian with variance (intensity / dt), the Euler-Maruyama convention.

#include <cmath>
#include <cstdint>
#include <random>

#include "levem/core_model.hpp"

namespace levem {

/// Identifiers for independent random streams. Each channel draws from its
/// own engine, so samples do not depend on which other channels are enabled.
enum class NoiseChannel : std::uint32_t {
  InitialState = 0,
  Gas = 1,
  Resistive = 2,
  Feedback = 3,
  Electrode = 4,
  CircuitVoltage = 5,
};

/// Seeded standard-normal stream for one (seed, channel) pair.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, NoiseChannel channel) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(channel),
                      0x6c65766du};
    engine_.seed(seq);
  }

  double standard_normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct NoiseEnvironment {
  GasConfig gas;
  double circuit_temperature = 300.0;     // T_R [K]
  double feedback_noise_voltage = 1e-10;  // V_fb [V]
  double amp_resistance = 50.0;           // R_amp [Ohm]
  double amp_bandwidth = 1.0;             // B [Hz]
  ElectrodeNoiseModel electrode;
  double electrode_temperature = 300.0;   // T_E [K]
  std::uint64_t rng_seed = 0;
};

/// One fluctuation-dissipation pair acting on the particle momentum.
struct NoiseChannelStats {
  double damping_rate = 0.0;  // gamma_i [1/s]
  double temperature = 0.0;   // T_i [K]
  double mass = 0.0;          // M [kg]

  /// Force intensity 2 k T gamma M [N^2 s].
  double intensity() const { return 2.0 * kBoltzmann * temperature * damping_rate * mass; }
  double force_std(double dt) const { return std::sqrt(intensity() / dt); }
};

inline double thermal_force_sample(const NoiseChannelStats& channel, double dt, NoiseStream& rng) {
  if (!(dt > 0.0)) throw InvalidParameter("thermal_force_sample: dt must be positive");
  const double sigma = channel.force_std(dt);
  const double xi = rng.standard_normal();  // always drawn, keeps the stream aligned
  return sigma * xi;
}

/// Electrode field noise force with <F(t+tau) F(t)> = q^2 S_E(w_z) delta(tau).
inline double electrode_force_sample(const ParticleSpec& p, double s_e, double dt, NoiseStream& rng) {
  if (!(dt > 0.0)) throw InvalidParameter("electrode_force_sample: dt must be positive");
  if (!(s_e >= 0.0)) throw InvalidParameter("electrode_force_sample: S_E must be >= 0");
  const double xi = rng.standard_normal();
  return std::abs(p.charge()) * std::sqrt(s_e / dt) * xi;
}

/// Johnson-Nyquist voltage sqrt(4 k T_R R_eff dnu) seen on resonance.
inline double circuit_voltage_noise(const Circuit& c, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidParameter("circuit_voltage_noise: bandwidth must be positive");
  return std::sqrt(4.0 * kBoltzmann * c.temperature * effective_resistance(c, c.omega_lc) * bandwidth);
}

/// T_fb^n defined through V_fb = sqrt(4 k T_fb^n R_amp B).
inline double feedback_noise_temperature(double v_fb, double amp_resistance, double bandwidth) {
  if (!(amp_resistance > 0.0) || !(bandwidth > 0.0)) {
    throw InvalidParameter("feedback_noise_temperature: R_amp and B must be positive");
  }
  return v_fb * v_fb / (4.0 * kBoltzmann * amp_resistance * bandwidth);
}

inline double feedback_noise_voltage(double t_fb_n, double amp_resistance, double bandwidth) {
  if (!(amp_resistance > 0.0) || !(bandwidth > 0.0)) {
    throw InvalidParameter("feedback_noise_voltage: R_amp and B must be positive");
  }
  return std::sqrt(4.0 * kBoltzmann * t_fb_n * amp_resistance * bandwidth);
}

}  // namespace levem
