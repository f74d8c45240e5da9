#pragma once

// Stochastic integration of the axial particle motion.
//
// Two models share one integrator:
//  * Reduced: the circuit is adiabatically eliminated and enters only as the
//    friction gamma_res plus its fluctuating force,
//      M z'' + M gamma_tot z' - F_trap(z, t) = sum of noise forces.
//  * Coupled: the particle and the RLC circuit (charge Q, flux Phi) are
//    integrated together through the Hamiltonian coupling (q / C d) Q z.
//
// The trapping force is either the full Paul-trap force
// M (w_D^2/4)(a_z - 2 q_z cos w_D t) z or the static pseudo-potential
// -M w_z^2 z.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "levem/core_model.hpp"
#include "levem/feedback.hpp"
#include "levem/noise_sources.hpp"

namespace levem {

enum class Model { Reduced, Coupled };
enum class Potential { Paul, Harmonic };

inline std::string to_string(Model m) { return m == Model::Reduced ? "reduced" : "coupled"; }
inline std::string to_string(Potential p) { return p == Potential::Paul ? "paul" : "harmonic"; }

/// Enabled noise channels. In the reduced model each channel is a
/// fluctuation-dissipation pair, so disabling gas or resistive removes the
/// friction as well. In the coupled model the circuit friction is part of
/// the circuit and `resistive` only switches its Johnson noise.
struct ChannelSet {
  bool gas = true;
  bool resistive = true;
  bool feedback = true;
  bool electrode = false;  // opt-in

  static ChannelSet none() { return {false, false, false, false}; }
};

struct SimState {
  double t = 0.0;
  double z = 0.0;
  double p = 0.0;
  double Q = 0.0;    // capacitor charge (coupled only)
  double Phi = 0.0;  // inductor flux (coupled only)
};

struct StateRate {
  double z = 0.0;
  double p = 0.0;
  double Q = 0.0;
  double Phi = 0.0;
};

/// Stochastic increments accumulated over one step.
struct NoiseKick {
  double p = 0.0;
  double Q = 0.0;
  double Phi = 0.0;
};

/// Everything the right-hand sides need, flattened from the configs.
struct SystemModel {
  Model model = Model::Reduced;
  Potential potential = Potential::Paul;
  ChannelSet channels;

  double mass = 0.0;
  double charge = 0.0;  // [C]
  double eta = 1.0;
  double d = 1.0;
  double omega_drive = 0.0;
  double a_z = 0.0;
  double q_z = 0.0;
  double omega_z = 0.0;

  Circuit circuit;
  double gamma_gas = 0.0;
  double gamma_res = 0.0;
  double gain = 0.0;  // 0 unless feedback is enabled

  NoiseChannelStats gas_noise;
  NoiseChannelStats resistive_noise;
  NoiseChannelStats feedback_noise;
  double electrode_intensity = 0.0;  // q^2 S_E(w_z) [N^2 s]

  /// Friction acting directly on the particle momentum.
  double particle_damping() const {
    double g = channels.gas ? gamma_gas : 0.0;
    if (model == Model::Reduced && channels.resistive) g += (1.0 - gain) * gamma_res;
    return g;
  }

  /// Coefficient k(t) of the trapping force F = k(t) z.
  double trap_stiffness(double t) const {
    if (potential == Potential::Harmonic) return -mass * omega_z * omega_z;
    return mass * 0.25 * omega_drive * omega_drive * (a_z - 2.0 * q_z * std::cos(omega_drive * t));
  }

  double coupling() const { return charge / (circuit.capacitance * d); }
};

/// Assembles the system for one configuration. T_E and S_E are evaluated at
/// the secular frequency. Feedback requires the reduced model.
inline SystemModel make_system(const ParticleSpec& particle, const TrapConfig& trap,
                               const CircuitConfig& circuit_cfg, const NoiseEnvironment& env,
                               const FeedbackConfig& feedback, Model model, Potential potential,
                               ChannelSet channels) {
  feedback.validate();
  if (feedback.enabled && model == Model::Coupled) {
    throw ConfigError("feedback is only modelled in the reduced model");
  }
  const auto stab = stability_params(trap, particle);
  SystemModel s;
  s.model = model;
  s.potential = potential;
  s.channels = channels;
  s.mass = particle.mass();
  s.charge = particle.charge();
  s.eta = trap.eta;
  s.d = trap.d;
  s.omega_drive = trap.drive_freq;
  s.a_z = stab.a_z;
  s.q_z = stab.q_z;
  s.omega_z = stab.omega_z;
  CircuitConfig cc = circuit_cfg;
  cc.temperature = env.circuit_temperature;
  s.circuit = resolve_circuit(cc, stab.omega_z);
  s.gamma_gas = gas_damping_rate(particle, env.gas);
  s.gamma_res = resistive_damping_rate(particle, trap, s.circuit);
  s.gain = feedback.enabled ? feedback.gain : 0.0;
  if (feedback.enabled) feedback.validate();
  if (feedback.enabled && s.gain >= 1.0) {
    throw ConfigError("simulation with feedback gain >= 1 has no steady state");
  }

  s.gas_noise = {s.gamma_gas, env.gas.temperature, s.mass};
  // Johnson noise reaches the particle through (1 - G); the amplifier noise
  // adds in quadrature with weight G. Friction is (1 - G) gamma_res, so the
  // steady state is (1 - G) T_R + G^2 T_fb^n / (1 - G).
  const double g = s.gain;
  s.resistive_noise = {s.gamma_res, (1.0 - g) * (1.0 - g) * env.circuit_temperature, s.mass};
  const double t_fb_n = feedback.enabled
                            ? feedback_noise_temperature(feedback.noise_voltage, feedback.amp_resistance,
                                                         feedback.bandwidth)
                            : 0.0;
  s.feedback_noise = {s.gamma_res, g * g * t_fb_n, s.mass};
  const double s_e = electrode_noise_psd(stab.omega_z, trap, env.electrode, env.electrode_temperature);
  s.electrode_intensity = s.charge * s.charge * s_e;
  return s;
}

// ---------------------------------------------------------------------------
// Right-hand sides
// ---------------------------------------------------------------------------

/// Deterministic drift of the coupled particle-circuit system.
///   Q'   = Phi / L            (- Gamma Q,   parallel)
///   Phi' = -Q/C - (q/Cd) z    (- Gamma Phi, series)
///   z'   = p / M
///   p'   = F_trap(z, t) - (q/Cd) Q - M gamma_gas z'
inline StateRate coupled_rhs(const SimState& x, const SystemModel& s) {
  const Circuit& c = s.circuit;
  const double k = s.coupling();
  StateRate r;
  r.Q = x.Phi / c.inductance;
  r.Phi = -x.Q / c.capacitance - k * x.z;
  if (c.topology == Topology::Series) {
    r.Phi -= c.gamma * x.Phi;
  } else {
    r.Q -= c.gamma * x.Q;
  }
  r.z = x.p / s.mass;
  r.p = s.trap_stiffness(x.t) * x.z - k * x.Q - s.particle_damping() * x.p;
  return r;
}

/// Deterministic drift of the particle-only model.
inline StateRate reduced_rhs(const SimState& x, const SystemModel& s) {
  StateRate r;
  r.z = x.p / s.mass;
  r.p = s.trap_stiffness(x.t) * x.z - s.particle_damping() * x.p;
  return r;
}

inline StateRate drift(const SimState& x, const SystemModel& s) {
  return s.model == Model::Coupled ? coupled_rhs(x, s) : reduced_rhs(x, s);
}

/// One stochastic Heun step: trapezoidal drift with the same additive noise
/// increment in predictor and corrector.
inline SimState heun_step(const SystemModel& s, const SimState& x, double dt, const NoiseKick& kick) {
  const StateRate k1 = drift(x, s);
  SimState pred{x.t + dt, x.z + k1.z * dt, x.p + k1.p * dt + kick.p, x.Q + k1.Q * dt + kick.Q,
                x.Phi + k1.Phi * dt + kick.Phi};
  const StateRate k2 = drift(pred, s);
  const double h = 0.5 * dt;
  return {x.t + dt, x.z + h * (k1.z + k2.z), x.p + h * (k1.p + k2.p) + kick.p,
          x.Q + h * (k1.Q + k2.Q) + kick.Q, x.Phi + h * (k1.Phi + k2.Phi) + kick.Phi};
}

/// Draws per-step noise increments, one independent stream per channel.
class NoiseGenerator {
 public:
  NoiseGenerator(const SystemModel& s, std::uint64_t seed)
      : sys_(&s),
        gas_(seed, NoiseChannel::Gas),
        resistive_(seed, NoiseChannel::Resistive),
        feedback_(seed, NoiseChannel::Feedback),
        electrode_(seed, NoiseChannel::Electrode),
        circuit_(seed, NoiseChannel::CircuitVoltage) {}

  NoiseKick draw(double dt) {
    const SystemModel& s = *sys_;
    NoiseKick k;
    if (s.channels.gas && s.gamma_gas > 0.0) k.p += thermal_force_sample(s.gas_noise, dt, gas_) * dt;
    if (s.channels.electrode && s.electrode_intensity > 0.0) {
      k.p += std::sqrt(s.electrode_intensity / dt) * electrode_.standard_normal() * dt;
    }
    if (s.model == Model::Reduced) {
      if (s.channels.resistive && s.resistive_noise.intensity() > 0.0) {
        k.p += thermal_force_sample(s.resistive_noise, dt, resistive_) * dt;
      }
      if (s.channels.feedback && s.feedback_noise.intensity() > 0.0) {
        k.p += thermal_force_sample(s.feedback_noise, dt, feedback_) * dt;
      }
    } else if (s.channels.resistive && s.circuit.temperature > 0.0) {
      const Circuit& c = s.circuit;
      // Series: flux diffusion 2 Gamma L k T. Parallel: charge diffusion 2 Gamma C k T.
      const double inertia = c.topology == Topology::Series ? c.inductance : c.capacitance;
      const double kick = std::sqrt(2.0 * c.gamma * inertia * kBoltzmann * c.temperature * dt) *
                          circuit_.standard_normal();
      (c.topology == Topology::Series ? k.Phi : k.Q) += kick;
    }
    return k;
  }

 private:
  const SystemModel* sys_;
  NoiseStream gas_;
  NoiseStream resistive_;
  NoiseStream feedback_;
  NoiseStream electrode_;
  NoiseStream circuit_;
};

// ---------------------------------------------------------------------------
// Plans and trajectories
// ---------------------------------------------------------------------------

/// On-resonance friction q^2 R_eff / (M d^2) exerted by the explicit
/// circuit. The Hamiltonian coupling carries no pick-up factor, so this is
/// gamma_res / eta^2.
inline double coupled_circuit_damping(const SystemModel& s) { return s.gamma_res / (s.eta * s.eta); }

/// Friction rate of the particle from every enabled channel.
inline double total_damping(const SystemModel& s) {
  double g = s.particle_damping();
  if (s.model == Model::Coupled) g += coupled_circuit_damping(s);
  return g;
}

/// Steady-state secular temperature sum_i gamma_i T_i / gamma plus the
/// electrode term q^2 S_E / (2 M k_B gamma).
inline double expected_temperature(const SystemModel& s) {
  const double g = total_damping(s);
  if (!(g > 0.0)) throw NoSteadyState("no damping channel is enabled");
  double num = 0.0;
  if (s.channels.gas) num += s.gamma_gas * s.gas_noise.temperature;
  if (s.channels.resistive) {
    num += s.model == Model::Reduced ? s.gamma_res * s.resistive_noise.temperature
                                     : coupled_circuit_damping(s) * s.circuit.temperature;
  }
  if (s.channels.feedback && s.model == Model::Reduced) num += s.gamma_res * s.feedback_noise.temperature;
  if (s.channels.electrode) num += s.electrode_intensity / (2.0 * s.mass * kBoltzmann);
  return num / g;
}

inline constexpr double kStabilityGuard = 0.05;

struct SimPlan {
  double dt = 0.0;
  double duration = 0.0;
  int output_decimation = 1;
  double initial_temperature = 1000.0;  // T_in for thermal initial conditions
  /// Overrides the thermal draw (used for kicked / deterministic runs).
  std::optional<SimState> initial_state;
};

/// Default step: 200 steps per drive period (or per secular period for the
/// static potential).
inline double default_dt(const SystemModel& s) {
  const double w = s.potential == Potential::Paul ? s.omega_drive : s.omega_z;
  return kTwoPi / w / 200.0;
}

/// Largest rate the step has to resolve.
inline double fastest_rate(const SystemModel& s) {
  double w = std::max(s.omega_z, s.particle_damping());
  if (s.potential == Potential::Paul) w = std::max(w, s.omega_drive);
  if (s.model == Model::Coupled) w = std::max({w, s.circuit.gamma, s.circuit.omega_lc});
  return w;
}

inline void validate_plan(const SimPlan& plan, const SystemModel& s) {
  if (!(plan.dt > 0.0)) throw ConfigError("sim: dt must be positive");
  if (!(plan.duration >= plan.dt)) throw ConfigError("sim: duration must be at least one step");
  if (plan.output_decimation < 1) throw ConfigError("sim: output decimation must be >= 1");
  if (!(plan.initial_temperature >= 0.0)) throw ConfigError("sim: initial temperature must be >= 0");
  const double w = fastest_rate(s);
  if (plan.dt * w > kStabilityGuard) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "sim: dt * max rate = %.4g exceeds %.2g (dt = %.4g s, rate = %.4g /s)",
                  plan.dt * w, kStabilityGuard, plan.dt, w);
    throw StepTooLarge(buf);
  }
}

/// Lab-frame phase-space point for secular coordinates (z_s, v_s) at time t,
/// including first-order micromotion z = z_s (1 + (q_z/2) cos w_D t).
inline SimState from_secular(const SystemModel& s, double t, double z_s, double v_s) {
  SimState x;
  x.t = t;
  if (s.potential == Potential::Paul) {
    const double half_q = 0.5 * s.q_z;
    const double phase = s.omega_drive * t;
    x.z = z_s * (1.0 + half_q * std::cos(phase));
    x.p = s.mass * (v_s * (1.0 + half_q * std::cos(phase)) - z_s * half_q * s.omega_drive * std::sin(phase));
  } else {
    x.z = z_s;
    x.p = s.mass * v_s;
  }
  return x;
}

/// Secular position and velocity drawn from a Boltzmann distribution at
/// `temperature`; the circuit starts discharged.
inline SimState thermal_initial_state(const SystemModel& s, double temperature, std::uint64_t seed) {
  NoiseStream rng(seed, NoiseChannel::InitialState);
  const double v_std = std::sqrt(kBoltzmann * temperature / s.mass);
  const double z_std = v_std / s.omega_z;
  const double z_s = z_std * rng.standard_normal();
  const double v_s = v_std * rng.standard_normal();
  return from_secular(s, 0.0, z_s, v_s);
}

struct Trajectory {
  std::vector<double> t;
  std::vector<double> z;
  std::vector<double> v;
  std::vector<double> Q;    // empty for the reduced model
  std::vector<double> Phi;  // empty for the reduced model
  bool has_circuit = false;
  double sample_interval = 0.0;
  std::uint64_t seed = 0;
  /// Config snapshot, one "key = value" entry per line.
  std::string config_snapshot;

  std::size_t size() const { return t.size(); }
};

namespace detail {

inline void check_finite(const SimState& x, long step) {
  if (!std::isfinite(x.z) || !std::isfinite(x.p) || !std::isfinite(x.Q) || !std::isfinite(x.Phi)) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "non-finite state at step %ld (t = %.6g s): z = %g, p = %g, Q = %g, Phi = %g", step, x.t,
                  x.z, x.p, x.Q, x.Phi);
    throw NumericalError(buf);
  }
}

}  // namespace detail

/// Runs the plan and hands every output sample (every `output_decimation`
/// steps, including t = 0) to `observer`. Bit-reproducible for a fixed seed.
template <typename Observer>
void integrate_with(const SimPlan& plan, const SystemModel& s, std::uint64_t seed, Observer&& observer) {
  validate_plan(plan, s);
  SimState x = plan.initial_state ? *plan.initial_state
                                  : thermal_initial_state(s, plan.initial_temperature, seed);
  NoiseGenerator noise(s, seed);
  const long steps = std::lround(plan.duration / plan.dt);
  const double dt = plan.dt;
  const double t0 = x.t;
  observer(x);
  for (long n = 1; n <= steps; ++n) {
    x = heun_step(s, x, dt, noise.draw(dt));
    x.t = t0 + static_cast<double>(n) * dt;  // no accumulated round-off in t
    if (n % plan.output_decimation == 0) {
      detail::check_finite(x, n);
      observer(x);
    }
  }
  detail::check_finite(x, steps);
}

inline Trajectory integrate(const SimPlan& plan, const SystemModel& s, std::uint64_t seed,
                            std::string config_snapshot = {}) {
  Trajectory tr;
  tr.has_circuit = s.model == Model::Coupled;
  tr.sample_interval = plan.dt * plan.output_decimation;
  tr.seed = seed;
  tr.config_snapshot = std::move(config_snapshot);
  const std::size_t n = static_cast<std::size_t>(std::lround(plan.duration / plan.dt)) /
                            static_cast<std::size_t>(plan.output_decimation) + 1;
  tr.t.reserve(n);
  tr.z.reserve(n);
  tr.v.reserve(n);
  if (tr.has_circuit) {
    tr.Q.reserve(n);
    tr.Phi.reserve(n);
  }
  integrate_with(plan, s, seed, [&](const SimState& x) {
    tr.t.push_back(x.t);
    tr.z.push_back(x.z);
    tr.v.push_back(x.p / s.mass);
    if (tr.has_circuit) {
      tr.Q.push_back(x.Q);
      tr.Phi.push_back(x.Phi);
    }
  });
  return tr;
}

/// Delimited text: '#'-prefixed snapshot and seed, header row, then
/// `t,z,v[,Q,Phi]` in SI with 17 significant digits.
inline void write_trajectory(std::ostream& os, const Trajectory& tr) {
  std::istringstream snap(tr.config_snapshot);
  for (std::string line; std::getline(snap, line);) os << "# " << line << '\n';
  os << "# seed = " << tr.seed << '\n';
  os << (tr.has_circuit ? "t,z,v,Q,Phi\n" : "t,z,v\n");
  char buf[128];
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.has_circuit) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", tr.t[i], tr.z[i], tr.v[i], tr.Q[i],
                    tr.Phi[i]);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", tr.t[i], tr.z[i], tr.v[i]);
    }
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// Image current I = -(q eta / d) z' when the circuit follows adiabatically.
inline double induced_current(double velocity, const ParticleSpec& p, const TrapConfig& trap) {
  return -p.charge() * trap.eta / trap.d * velocity;
}

inline double pickup_voltage(double current, double r_eff) { return current * r_eff; }

struct FrequencyResponse {
  double dispersive = 0.0;    // shift of w^2 [rad^2/s^2]
  double damping_rate = 0.0;  // friction rate at this frequency [1/s]
};

/// Series circuit eliminated in the Fourier domain:
///   w^2 z = (w_z^2 + kappa (w^2 - w_LC^2)/D) z + i w (kappa Gamma / D) z,
/// kappa = q^2 w_LC^2 / (M C d^2), D = (w^2 - w_LC^2)^2 + w^2 Gamma^2.
/// On resonance the friction is q^2 / (M C Gamma d^2); for w << w_LC it
/// tends to the adiabatic rate Gamma L q^2 / (M d^2).
inline FrequencyResponse frequency_response(double omega, const ParticleSpec& p, const TrapConfig& trap,
                                            const Circuit& c) {
  if (c.topology != Topology::Series) {
    throw InvalidParameter("frequency_response: only the series circuit is supported");
  }
  const double q = p.charge();
  const double w2 = omega * omega;
  const double wlc2 = c.omega_lc * c.omega_lc;
  const double kappa = q * q * wlc2 / (p.mass() * c.capacitance * trap.d * trap.d);
  const double detune = w2 - wlc2;
  const double denom = detune * detune + w2 * c.gamma * c.gamma;
  return {kappa * detune / denom, kappa * c.gamma / denom};
}

}  // namespace levem
