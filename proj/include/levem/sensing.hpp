#pragma once

// Detection and sensitivity limits set by the Johnson noise of the circuit.

#include <cmath>

#include "levem/core_model.hpp"

namespace levem {

struct SensingQuery {
  ParticleSpec particle;
  TrapConfig trap;
  Circuit circuit;  // resolved; circuit.temperature is T_R
  double bandwidth = 1.0;  // detection bandwidth dnu [Hz]
  double omega_z = 0.0;    // [rad/s]
  double gamma = 0.0;      // damping of the motion [1/s]

  double temperature() const { return circuit.temperature; }
  double r_eff() const { return effective_resistance(circuit, omega_z); }
};

/// Smallest resolvable velocity on resonance, sqrt(4 k T_R dnu / (M gamma)).
inline double min_velocity(const SensingQuery& s) {
  if (!(s.gamma > 0.0)) throw InvalidParameter("min_velocity: gamma must be positive");
  if (!(s.bandwidth > 0.0)) throw InvalidParameter("min_velocity: bandwidth must be positive");
  return std::sqrt(4.0 * kBoltzmann * s.temperature() * s.bandwidth / (s.particle.mass() * s.gamma));
}

inline double min_displacement(const SensingQuery& s) {
  if (!(s.omega_z > 0.0)) throw InvalidParameter("min_displacement: omega_z must be positive");
  return min_velocity(s) / s.omega_z;
}

struct DetectionResult {
  bool detectable = false;
  /// Thermal signal over Johnson noise, I_max R_eff / V_R. Equals
  /// sqrt(gamma / (4 dnu)) when the particle is at T_R.
  double margin = 0.0;
};

/// Signal-to-noise of the thermal image current with the particle in
/// equilibrium with the circuit (T_CM = T_R), and gamma = gamma_res of the
/// query's particle and circuit. The bound reduces to gamma > 4 dnu.
inline DetectionResult detection_requirement(const SensingQuery& s) {
  if (!(s.bandwidth > 0.0)) throw InvalidParameter("detection_requirement: bandwidth must be positive");
  const double r_eff = s.r_eff();
  const double coupling = std::abs(s.particle.charge()) * s.trap.eta / s.trap.d;
  const double kT = kBoltzmann * s.temperature();
  DetectionResult r;
  if (coupling == 0.0) return r;
  if (kT == 0.0) {
    r.detectable = true;
    r.margin = std::numeric_limits<double>::infinity();
    return r;
  }
  const double signal = coupling * std::sqrt(kT / s.particle.mass()) * r_eff;
  const double noise = std::sqrt(4.0 * kT * r_eff * s.bandwidth);
  r.margin = signal / noise;
  r.detectable = r.margin > 1.0;
  return r;
}

/// Force sensitivity gamma sqrt(k T_R M); only meaningful for gamma >= 4 dnu.
inline double min_force(const SensingQuery& s) {
  if (!(s.gamma >= 4.0 * s.bandwidth)) {
    throw BelowDetectionLimit("min_force: gamma < 4 dnu, motion is not resolved above Johnson noise");
  }
  return s.gamma * std::sqrt(kBoltzmann * s.temperature() * s.particle.mass());
}

/// Force sensitivity at the optimal detection point gamma = 4 dnu.
inline double min_force_optimal(const SensingQuery& s) {
  SensingQuery q = s;
  q.gamma = 4.0 * s.bandwidth;
  return min_force(q);
}

struct DetectabilityBound {
  double q_over_sqrt_m = 0.0;  // threshold on q / sqrt(M) [C / sqrt(kg)]
  double max_mass = 0.0;       // largest detectable mass for the given charge [kg]
};

/// q / sqrt(M) > sqrt(2 dnu / R_eff) d / eta, i.e. M < (q eta / d)^2 R_eff / (2 dnu).
inline DetectabilityBound detectable_charge_to_mass(const TrapConfig& trap, const Circuit& circuit, double bandwidth,
                                                    double charge_e) {
  const double r_eff = effective_resistance(circuit, circuit.omega_lc);
  if (!(r_eff > 0.0)) throw InvalidParameter("detectable_charge_to_mass: R_eff must be positive");
  if (!(bandwidth > 0.0)) throw InvalidParameter("detectable_charge_to_mass: bandwidth must be positive");
  DetectabilityBound b;
  b.q_over_sqrt_m = std::sqrt(2.0 * bandwidth / r_eff) * trap.d / trap.eta;
  const double coupling = charge_e * kElementaryCharge * trap.eta / trap.d;
  b.max_mass = coupling * coupling * r_eff / (2.0 * bandwidth);
  return b;
}

struct ZeroPoint {
  double z_zpf = 0.0;     // sqrt(hbar / (2 M w_z)) [m]
  double occupancy = 0.0; // k T / (hbar w_z)
};

inline ZeroPoint zero_point_and_occupancy(const ParticleSpec& p, double omega_z, double temperature) {
  if (!(omega_z > 0.0)) throw InvalidParameter("zero_point_and_occupancy: omega_z must be positive");
  return {std::sqrt(kHbar / (2.0 * p.mass() * omega_z)), kBoltzmann * temperature / (kHbar * omega_z)};
}

}  // namespace levem
