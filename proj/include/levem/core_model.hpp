#pragma once

// Domain types and closed-form derived quantities for a charged sphere in
// a Paul trap whose endcaps are wired to an RLC circuit. Everything here is
// a pure function of immutable inputs. Units are strict SI except charge,
// which is carried in multiples of e and converted through charge().

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "levem/error.hpp"
#include "levem/mathieu.hpp"
#include "levem/units.hpp"

namespace levem {

// ---------------------------------------------------------------------------
// Particle
// ---------------------------------------------------------------------------

inline double derive_mass(double radius, double density) {
  if (!(radius > 0.0) || !(density > 0.0)) {
    throw InvalidParameter("derive_mass: radius and density must be positive");
  }
  return 4.0 / 3.0 * kPi * radius * radius * radius * density;
}

class ParticleSpec {
 public:
  /// radius [m], density [kg/m^3], charge in units of e (signed).
  ParticleSpec(double radius, double density, double charge_e)
      : radius_(radius), density_(density), charge_e_(charge_e),
        mass_(derive_mass(radius, density)) {
    if (!std::isfinite(charge_e)) throw InvalidParameter("particle charge must be finite");
  }

  double radius() const { return radius_; }
  double density() const { return density_; }
  double charge_e() const { return charge_e_; }
  double charge() const { return charge_e_ * kElementaryCharge; }
  double mass() const { return mass_; }

  ParticleSpec with_charge(double charge_e) const { return {radius_, density_, charge_e}; }

 private:
  double radius_;
  double density_;
  double charge_e_;
  double mass_;
};

// ---------------------------------------------------------------------------
// Trap
// ---------------------------------------------------------------------------

struct TrapConfig {
  double u0 = 3000.0;                      // AC amplitude [V]
  double udc = 0.0;                        // DC endcap voltage [V]
  double drive_freq = hz_to_rad(100e3);    // w_D [rad/s]
  double r0 = 500e-6;                      // half RF electrode separation [m]
  double d = 1e-3;                         // endcap separation [m]
  double eta = 0.8;                        // pick-up / geometry factor
  double r_prime = 500e-6;                 // trap centre to endcap [m]

  void validate() const {
    if (!(drive_freq > 0.0)) throw InvalidParameter("trap: drive frequency must be positive");
    if (!(r0 > 0.0)) throw InvalidParameter("trap: r0 must be positive");
    if (!(d > 0.0)) throw InvalidParameter("trap: endcap separation d must be positive");
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidParameter("trap: eta must lie in (0, 1]");
    if (!(r_prime > 0.0)) throw InvalidParameter("trap: r_prime must be positive");
  }

  double drive_period() const { return kTwoPi / drive_freq; }
};

struct StabilityParams {
  double a_z = 0.0;
  double q_z = 0.0;
  double omega_z = 0.0;  // secular frequency [rad/s]
};

/// Mathieu parameters and secular frequency of the axial motion.
///
/// The equation of motion is z'' = (w_D^2/4)(a_z - 2 q_z cos w_D t) z, so a
/// positive a_z is anti-confining. For a_z = 0 the first stability region is
/// |q_z| < 0.908; otherwise stability is decided by the monodromy trace.
/// Lowest-order secular frequency: w_z = (w_D/2) sqrt(q_z^2/2 - a_z).
inline StabilityParams stability_params(const TrapConfig& trap, const ParticleSpec& particle) {
  trap.validate();
  const double m = particle.mass();
  const double q = particle.charge();
  const double denom = m * trap.drive_freq * trap.drive_freq * trap.r0 * trap.r0;
  StabilityParams s;
  s.a_z = 4.0 * trap.udc * trap.eta * q / denom;
  s.q_z = -2.0 * trap.u0 * trap.eta * q / denom;
  if (s.q_z == 0.0 && s.a_z >= 0.0) {
    throw UnstableTrap("untrapped: particle charge or drive amplitude is zero (q_z = 0)");
  }
  bool stable;
  if (s.a_z == 0.0) {
    stable = std::abs(s.q_z) < kMathieuQBoundary;
  } else {
    stable = mathieu_floquet(s.a_z, s.q_z).stable;
  }
  const double beta2 = 0.5 * s.q_z * s.q_z - s.a_z;
  if (!stable || !(beta2 > 0.0)) {
    throw UnstableTrap("unstable trap: (a_z, q_z) = (" + std::to_string(s.a_z) + ", " +
                       std::to_string(s.q_z) + ") lies outside the first stability region");
  }
  s.omega_z = s.a_z == 0.0 ? trap.drive_freq * std::abs(s.q_z) / (2.0 * std::numbers::sqrt2)
                           : 0.5 * trap.drive_freq * std::sqrt(beta2);
  return s;
}

// ---------------------------------------------------------------------------
// Circuit
// ---------------------------------------------------------------------------

enum class Topology { Series, Parallel };

inline std::string to_string(Topology t) { return t == Topology::Series ? "series" : "parallel"; }

/// RLC circuit as configured. Exactly one of quality_factor or inductance is
/// given; the rest is fixed by tuning w_LC to the secular frequency.
struct CircuitConfig {
  Topology topology = Topology::Series;
  double resistance = 100e6;  // [Ohm]
  std::optional<double> quality_factor = 100.0;
  std::optional<double> inductance;  // [H]
  double temperature = 300.0;  // T_R [K]

  void validate() const {
    if (!(resistance > 0.0)) throw InvalidParameter("circuit: resistance must be positive");
    if (!(temperature >= 0.0)) throw InvalidParameter("circuit: temperature must be >= 0");
    if (quality_factor.has_value() == inductance.has_value()) {
      throw InvalidParameter("circuit: give exactly one of quality_factor and inductance");
    }
    if (quality_factor && !(*quality_factor > 0.0)) {
      throw InvalidParameter("circuit: quality factor must be positive");
    }
    if (inductance && !(*inductance > 0.0)) throw InvalidParameter("circuit: inductance must be positive");
  }
};

/// Fully determined circuit, resonant at omega_lc.
struct Circuit {
  Topology topology = Topology::Series;
  double resistance = 0.0;
  double inductance = 0.0;
  double capacitance = 0.0;
  double gamma = 0.0;           // circuit damping rate Gamma [1/s]
  double quality_factor = 0.0;  // omega_lc / Gamma
  double omega_lc = 0.0;
  double temperature = 0.0;
};

/// Resolve L, C, Gamma and Q_f with w_LC = omega_z.
/// Series: Gamma = R/L. Parallel: Gamma = 1/(RC).
inline Circuit resolve_circuit(const CircuitConfig& cfg, double omega_z) {
  cfg.validate();
  if (!(omega_z > 0.0)) throw InvalidParameter("resolve_circuit: omega_z must be positive");
  Circuit c;
  c.topology = cfg.topology;
  c.resistance = cfg.resistance;
  c.temperature = cfg.temperature;
  c.omega_lc = omega_z;
  const double w2 = omega_z * omega_z;
  if (cfg.quality_factor) {
    c.quality_factor = *cfg.quality_factor;
    c.gamma = omega_z / c.quality_factor;
    if (cfg.topology == Topology::Series) {
      c.inductance = c.resistance / c.gamma;
      c.capacitance = 1.0 / (c.inductance * w2);
    } else {
      c.capacitance = 1.0 / (c.resistance * c.gamma);
      c.inductance = 1.0 / (c.capacitance * w2);
    }
  } else {
    c.inductance = *cfg.inductance;
    c.capacitance = 1.0 / (c.inductance * w2);
    c.gamma = cfg.topology == Topology::Series ? c.resistance / c.inductance
                                               : 1.0 / (c.resistance * c.capacitance);
    c.quality_factor = omega_z / c.gamma;
  }
  return c;
}

/// Series: R_eff = Q_f^2 R. Parallel: R_eff = w_z L Q_f.
inline double effective_resistance(const Circuit& c, double omega_z) {
  if (!(omega_z > 0.0)) throw InvalidParameter("effective_resistance: omega_z must be positive");
  return c.topology == Topology::Series ? c.quality_factor * c.quality_factor * c.resistance
                                        : omega_z * c.inductance * c.quality_factor;
}

// ---------------------------------------------------------------------------
// Damping rates
// ---------------------------------------------------------------------------

/// On-resonance friction rate gamma_res = (q eta / d)^2 R_eff / M.
inline double resistive_damping_rate(const ParticleSpec& p, const TrapConfig& trap, const Circuit& c) {
  const double coupling = p.charge() * trap.eta / trap.d;
  return coupling * coupling * effective_resistance(c, c.omega_lc) / p.mass();
}

/// Adiabatic friction gamma_ad = Gamma L q^2 / (M d^2) for a series circuit;
/// zero for parallel, where the capacitor is shorted.
inline double adiabatic_damping_rate(const ParticleSpec& p, const TrapConfig& trap, const Circuit& c) {
  if (c.topology == Topology::Parallel) return 0.0;
  const double q = p.charge();
  return c.gamma * c.inductance * q * q / (p.mass() * trap.d * trap.d);
}

struct GasConfig {
  double pressure = mbar_to_pa(1e-10);          // [Pa]
  double temperature = 300.0;                   // [K]
  double molecule_mass = amu_to_kg(28.0);       // N2 [kg]

  void validate() const {
    if (!(pressure >= 0.0)) throw InvalidParameter("gas: pressure must be >= 0");
    if (!(temperature > 0.0)) throw InvalidParameter("gas: temperature must be positive");
    if (!(molecule_mass > 0.0)) throw InvalidParameter("gas: molecule mass must be positive");
  }
};

/// Kinetic-theory mean speed sqrt(8 k T / (pi m)).
inline double mean_thermal_speed(const GasConfig& gas) {
  return std::sqrt(8.0 * kBoltzmann * gas.temperature / (kPi * gas.molecule_mass));
}

/// gamma_gas = (4 pi / 3) m n r^2 v_th / M with n = P / (k T).
inline double gas_damping_rate(const ParticleSpec& p, const GasConfig& gas) {
  gas.validate();
  const double n = gas.pressure / (kBoltzmann * gas.temperature);
  const double r = p.radius();
  return 4.0 * kPi / 3.0 * gas.molecule_mass * n * r * r * mean_thermal_speed(gas) / p.mass();
}

// ---------------------------------------------------------------------------
// Electrode surface noise
// ---------------------------------------------------------------------------

/// Power-law field noise S_E = g_E w^-alpha r'^(-/+beta) T_E^chi.
struct ElectrodeNoiseModel {
  double g_e = 1e-12;
  double alpha = 1.0;
  double beta = 3.0;
  double chi = 2.0;
  /// true: S_E falls off as r'^-beta (heating grows as the endcaps approach).
  bool inverse_distance = true;
};

inline double electrode_noise_psd(double omega, const TrapConfig& trap,
                                  const ElectrodeNoiseModel& m, double electrode_temperature) {
  if (!(omega > 0.0)) throw InvalidParameter("electrode_noise_psd: omega must be positive");
  if (!(trap.r_prime > 0.0)) throw InvalidParameter("electrode_noise_psd: r_prime must be positive");
  if (!(electrode_temperature >= 0.0)) throw InvalidParameter("electrode temperature must be >= 0");
  const double distance_exp = m.inverse_distance ? -m.beta : m.beta;
  return m.g_e * std::pow(omega, -m.alpha) * std::pow(trap.r_prime, distance_exp) *
         std::pow(electrode_temperature, m.chi);
}

/// Heating rate in quanta per second, q^2 S_E / (4 M hbar w_z).
inline double electrode_heating_rate(const ParticleSpec& p, double s_e, double omega_z) {
  if (!(omega_z > 0.0)) throw InvalidParameter("electrode_heating_rate: omega_z must be positive");
  const double q = p.charge();
  return q * q * s_e / (4.0 * p.mass() * kHbar * omega_z);
}

// ---------------------------------------------------------------------------
// Charge limits
// ---------------------------------------------------------------------------

struct ChargeLimits {
  double q_neg_max = 0.0;     // [e]
  double q_pos_max = 0.0;     // [e]
  double q_pauthenier = 0.0;  // [e]
  double p_factor = 3.0;
};

/// 3 for a conductor (infinite permittivity), 3 eps/(eps + 2) for a dielectric.
inline double pauthenier_factor(double relative_permittivity) {
  if (std::isinf(relative_permittivity)) return 3.0;
  if (!(relative_permittivity >= 1.0)) throw InvalidParameter("relative permittivity must be >= 1");
  return 3.0 * relative_permittivity / (relative_permittivity + 2.0);
}

inline ChargeLimits charge_limits(const ParticleSpec& p, double relative_permittivity, double field) {
  const double r_nm = p.radius() / 1e-9;
  ChargeLimits l;
  l.q_neg_max = -1.0 - 0.7 * r_nm * r_nm;
  l.q_pos_max = 1.0 + 21.0 * r_nm * r_nm;
  l.p_factor = pauthenier_factor(relative_permittivity);
  l.q_pauthenier = 4.0 * kPi * kVacuumPermittivity * p.radius() * p.radius() * l.p_factor *
                   std::abs(field) / kElementaryCharge;
  return l;
}

/// Non-fatal: |charge| above the surface-emission limits for this radius.
inline std::optional<std::string> charge_warning(const ParticleSpec& p) {
  const auto l = charge_limits(p, std::numeric_limits<double>::infinity(), 0.0);
  if (p.charge_e() > l.q_pos_max || p.charge_e() < l.q_neg_max) {
    return "particle charge " + std::to_string(p.charge_e()) + " e exceeds the limit [" +
           std::to_string(l.q_neg_max) + ", " + std::to_string(l.q_pos_max) + "] e for this radius";
  }
  return std::nullopt;
}

/// Fractional secular-frequency shift q^2 / (M C d^2 w_z^2) from mirror charges.
inline double mirror_shift_fraction(const ParticleSpec& p, const Circuit& c, const TrapConfig& trap,
                                    double omega_z) {
  const double q = p.charge();
  return q * q / (p.mass() * c.capacitance * trap.d * trap.d * omega_z * omega_z);
}

inline constexpr double kMirrorShiftWarnThreshold = 1e-3;

// ---------------------------------------------------------------------------
// Aggregate
// ---------------------------------------------------------------------------

struct DerivedParams {
  double mass = 0.0;
  double a_z = 0.0;
  double q_z = 0.0;
  double omega_z = 0.0;
  Circuit circuit;
  double r_eff = 0.0;
  double gamma_res = 0.0;
  double gamma_ad = 0.0;
  double gamma_gas = 0.0;
  double gamma_fb = 0.0;  // (1 - G) gamma_res when feedback is on, else 0
  double mirror_shift = 0.0;
  std::vector<std::string> warnings;
};

/// Evaluates every closed-form quantity for one configuration.
/// feedback_gain is ignored (gamma_fb = 0) when nullopt.
inline DerivedParams derive_params(const ParticleSpec& p, const TrapConfig& trap, const CircuitConfig& cc,
                                   const GasConfig& gas, std::optional<double> feedback_gain = std::nullopt) {
  DerivedParams d;
  d.mass = p.mass();
  const auto s = stability_params(trap, p);
  d.a_z = s.a_z;
  d.q_z = s.q_z;
  d.omega_z = s.omega_z;
  d.circuit = resolve_circuit(cc, s.omega_z);
  d.r_eff = effective_resistance(d.circuit, s.omega_z);
  d.gamma_res = resistive_damping_rate(p, trap, d.circuit);
  d.gamma_ad = adiabatic_damping_rate(p, trap, d.circuit);
  d.gamma_gas = gas_damping_rate(p, gas);
  d.gamma_fb = feedback_gain ? (1.0 - *feedback_gain) * d.gamma_res : 0.0;
  d.mirror_shift = mirror_shift_fraction(p, d.circuit, trap, s.omega_z);
  if (d.mirror_shift > kMirrorShiftWarnThreshold) {
    d.warnings.push_back("mirror-charge frequency shift " + std::to_string(d.mirror_shift) +
                         " exceeds 1e-3; neglecting mirror forces may be inaccurate");
  }
  if (auto w = charge_warning(p)) d.warnings.push_back(*w);
  return d;
}

}  // namespace levem
