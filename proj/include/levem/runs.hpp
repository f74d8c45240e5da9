#pragma once

// Subcommand drivers. Each writes delimited text with a '#' header that
// carries the resolved configuration and seed, so outputs can be replayed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "levem/analysis.hpp"
#include "levem/config.hpp"
#include "levem/ensemble.hpp"
#include "levem/mathieu.hpp"
#include "levem/quantum_moments.hpp"
#include "levem/sensing.hpp"

namespace levem {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string config_metadata(const RunConfig& cfg) { return "config = " + cfg.snapshot(); }

inline void write_header(std::ostream& os, const RunConfig& cfg, const std::string& title,
                         std::optional<std::uint64_t> seed = std::nullopt) {
  os << "# levem " << title << '\n';
  os << "# " << config_metadata(cfg) << '\n';
  if (seed) os << "# seed = " << *seed << '\n';
}

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

/// Step from the configuration, or the default drive resolution tightened
/// so that gamma dt <= 1e-3 and the stability guard holds with margin.
inline double auto_dt(const SystemModel& s, const std::optional<double>& requested) {
  if (requested) return *requested;
  double dt = default_dt(s);
  const double g = total_damping(s);
  if (g > 0.0) dt = std::min(dt, 1e-3 / g);
  return std::min(dt, 0.01 / fastest_rate(s));
}

inline SimPlan thermal_plan(const RunConfig& cfg, const SystemModel& s) {
  SimPlan plan;
  plan.dt = auto_dt(s, cfg.sim.dt);
  plan.duration = cfg.sim.duration;
  const double steps = std::ceil(plan.duration / plan.dt);
  plan.output_decimation = static_cast<int>(std::max(1.0, std::ceil(steps / cfg.sim.max_samples)));
  plan.initial_temperature = cfg.sim.initial_temperature;
  return plan;
}

/// Ring-down plan: a kick at z = 0 with energy `kick_energy`, and a
/// duration covering several secular periods (underdamped) or six damping
/// times (overdamped).
inline SimPlan ringdown_plan(const SystemModel& s, double kick_energy) {
  const double g = total_damping(s);
  if (!(g > 0.0)) throw NoSteadyState("ring-down needs at least one damping channel");
  SimPlan plan;
  plan.dt = std::min(default_dt(s), 1e-3 / g);
  plan.dt = std::min(plan.dt, 0.01 / fastest_rate(s));
  const double w = s.omega_z;
  if (g < w) {
    const double wp = std::sqrt(w * w - 0.25 * g * g);
    plan.duration = std::max(8.0 * kPi / wp, std::min(3.0 / g, 40.0 * kPi / wp));
  } else {
    plan.duration = 6.0 / g;
  }
  SimState x0;
  x0.p = std::sqrt(2.0 * s.mass * kick_energy);
  plan.initial_state = x0;
  return plan;
}

inline constexpr double kMaxRingdownSteps = 2e8;

/// Fitted damping rate of one kicked trajectory with every configured noise
/// channel active. The kick is 1e12 k_B T_eq so noise is negligible down to
/// the fit floor.
inline DampingFit measure_damping(const SystemModel& s, std::uint64_t seed) {
  const double t_eq = expected_temperature(s);
  const double kick = 1e12 * kBoltzmann * std::max(t_eq, 1.0);
  const SimPlan plan = ringdown_plan(s, kick);
  if (plan.duration / plan.dt > kMaxRingdownSteps) {
    throw Error("ring-down would need " + fmt(plan.duration / plan.dt) + " steps; damping too weak to resolve");
  }
  RingdownTracker rt(s, t_eq);
  integrate_with(plan, s, seed, [&](const SimState& x) { rt.push(x.t, x.z, x.p / s.mass); });
  return rt.fit();
}

struct ThermalResult {
  TemperatureEstimate estimate;
  double expected = 0.0;
  double burn_in = 0.0;
};

inline double default_burn_in(const RunConfig& cfg, const SystemModel& s) {
  if (cfg.sim.burn_in) return *cfg.sim.burn_in;
  const double g = total_damping(s);
  return g > 0.0 ? 5.0 / g : 0.0;
}

inline ThermalResult temperature_from(const Trajectory& tr, const RunConfig& cfg, const SystemModel& s) {
  ThermalResult r;
  r.burn_in = default_burn_in(cfg, s);
  const double g = total_damping(s);
  r.expected = g > 0.0 ? expected_temperature(s) : std::numeric_limits<double>::quiet_NaN();
  const double corr = g > 0.0 ? 1.0 / g : tr.sample_interval;
  r.estimate = estimate_temperature(tr, SecularFrame::of(s), r.burn_in, corr);
  return r;
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

inline void run_derive(const RunConfig& cfg, std::ostream& os) {
  const DerivedParams d = cfg.feedback.enabled
                              ? derive_params(cfg.particle, cfg.trap, cfg.circuit, cfg.gas, cfg.feedback.gain)
                              : derive_params(cfg.particle, cfg.trap, cfg.circuit, cfg.gas);
  const FloquetResult fl = mathieu_floquet(d.a_z, d.q_z);
  const ChargeLimits cl = charge_limits(cfg.particle, cfg.relative_permittivity, cfg.charging_field);
  const double s_e = electrode_noise_psd(d.omega_z, cfg.trap, cfg.electrode, cfg.electrode_temperature);
  const double t_fb_n = cfg.feedback.noise_temperature();

  write_header(os, cfg, "derive");
  for (const auto& w : d.warnings) os << "# warning: " << w << '\n';
  os << "name,value,unit\n";
  auto row = [&](const char* name, double v, const char* unit) { os << name << ',' << fmt(v) << ',' << unit << '\n'; };
  row("mass", d.mass, "kg");
  row("mass_amu", kg_to_amu(d.mass), "amu");
  row("charge", cfg.particle.charge(), "C");
  row("a_z", d.a_z, "1");
  row("q_z", d.q_z, "1");
  row("floquet_trace", fl.trace, "1");
  row("omega_z", d.omega_z, "rad/s");
  row("f_z", rad_to_hz(d.omega_z), "Hz");
  row("omega_lc", d.circuit.omega_lc, "rad/s");
  row("inductance", d.circuit.inductance, "H");
  row("capacitance", d.circuit.capacitance, "F");
  row("circuit_gamma", d.circuit.gamma, "1/s");
  row("quality_factor", d.circuit.quality_factor, "1");
  row("r_eff", d.r_eff, "Ohm");
  row("gamma_res", d.gamma_res, "1/s");
  row("gamma_ad", d.gamma_ad, "1/s");
  row("gamma_gas", d.gamma_gas, "1/s");
  row("gamma_fb", d.gamma_fb, "1/s");
  row("johnson_noise_voltage", circuit_voltage_noise(d.circuit, cfg.feedback.bandwidth), "V");
  row("feedback_noise_temperature", t_fb_n, "K");
  if (cfg.feedback.enabled && cfg.feedback.gain < 1.0) {
    row("feedback_equilibrium_temperature", equilibrium_temperature(cfg.circuit.temperature, t_fb_n, cfg.feedback.gain),
        "K");
  }
  row("electrode_psd", s_e, "V^2/(m^2 Hz)");
  row("electrode_heating_rate", electrode_heating_rate(cfg.particle, s_e, d.omega_z), "quanta/s");
  row("mirror_shift", d.mirror_shift, "1");
  row("q_pos_max", cl.q_pos_max, "e");
  row("q_neg_max", cl.q_neg_max, "e");
  row("q_pauthenier", cl.q_pauthenier, "e");
  row("pauthenier_factor", cl.p_factor, "1");
  row("peak_current_300k", peak_current(cfg.particle, cfg.trap, cfg.circuit.temperature), "A");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateResult {
  Trajectory trajectory;
  ThermalResult thermal;
};

inline SimulateResult simulate(const RunConfig& cfg) {
  const SystemModel s = cfg.system();
  const SimPlan plan = thermal_plan(cfg, s);
  SimulateResult r;
  r.trajectory = integrate(plan, s, cfg.sim.seed, config_metadata(cfg));
  r.thermal = temperature_from(r.trajectory, cfg, s);
  return r;
}

inline void write_thermal_summary(std::ostream& os, const RunConfig& cfg, const SystemModel& s,
                                  const ThermalResult& t) {
  write_header(os, cfg, "simulate summary", cfg.sim.seed);
  if (t.estimate.insufficient) os << "# warning: fewer than 20 independent batches after burn-in\n";
  os << "name,value,unit\n";
  os << "gamma_total," << fmt(total_damping(s)) << ",1/s\n";
  os << "burn_in," << fmt(t.burn_in) << ",s\n";
  os << "temperature," << fmt(t.estimate.temperature) << ",K\n";
  os << "temperature_std_error," << fmt(t.estimate.std_error) << ",K\n";
  os << "temperature_expected," << fmt(t.expected) << ",K\n";
  os << "batches," << t.estimate.batches << ",1\n";
}

inline void run_simulate(const RunConfig& cfg, std::ostream& trajectory_os, std::ostream& summary_os) {
  const SimulateResult r = simulate(cfg);
  write_trajectory(trajectory_os, r.trajectory);
  write_thermal_summary(summary_os, cfg, cfg.system(), r.thermal);
}

// ---------------------------------------------------------------------------
// psd
// ---------------------------------------------------------------------------

inline void run_psd(const RunConfig& cfg, std::ostream& os) {
  const SystemModel s = cfg.system();
  const SimulateResult r = simulate(cfg);
  std::vector<double> z;
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    if (r.trajectory.t[i] >= r.thermal.burn_in) z.push_back(r.trajectory.z[i]);
  }
  const Spectrum sp = estimate_psd(z, r.trajectory.sample_interval,
                                   std::min(cfg.psd.segment_length, z.size() / 2), cfg.psd.overlap);
  std::string meta = config_metadata(cfg) + "\nseed = " + std::to_string(cfg.sim.seed) +
                     "\nsecular_frequency_hz = " + fmt(rad_to_hz(s.omega_z)) +
                     "\npeak_frequency_hz = " + fmt(sp.frequency[sp.peak_index(0.5 * sp.resolution)]) +
                     "\ntemperature_k = " + fmt(r.thermal.estimate.temperature);
  os << "# levem psd\n";
  write_spectrum(os, sp, meta);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  std::size_t index = 0;
  double value = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double q_z = std::numeric_limits<double>::quiet_NaN();
  double omega_z = std::numeric_limits<double>::quiet_NaN();
  double gamma_res = std::numeric_limits<double>::quiet_NaN();
  double gamma_gas = std::numeric_limits<double>::quiet_NaN();
  double gamma_total = std::numeric_limits<double>::quiet_NaN();
  double t_expected = std::numeric_limits<double>::quiet_NaN();
  double t_cm = std::numeric_limits<double>::quiet_NaN();
  double t_cm_err = std::numeric_limits<double>::quiet_NaN();
  double gamma_fit = std::numeric_limits<double>::quiet_NaN();
  double fit_residual = std::numeric_limits<double>::quiet_NaN();
  std::string fit_regime;
  std::string error;
};

inline SweepRow sweep_point(const RunConfig& base, const SweepSpec& sw, std::size_t index) {
  SweepRow row;
  row.index = index;
  row.value = sw.values[index / sw.replicates];
  row.replicate = static_cast<int>(index % sw.replicates);
  row.seed = sw.seed_base + index;
  try {
    Json v = row.value;
    RunConfig cfg = with_value(base, sw.axis, v);
    cfg.sim.seed = row.seed;
    const SystemModel s = cfg.system();
    row.q_z = s.q_z;
    row.omega_z = s.omega_z;
    row.gamma_res = s.gamma_res;
    row.gamma_gas = s.gamma_gas;
    row.gamma_total = total_damping(s);
    if (row.gamma_total > 0.0) row.t_expected = expected_temperature(s);
    std::string errors;
    if (sw.measure_temperature) {
      try {
        const Trajectory tr = integrate(thermal_plan(cfg, s), s, row.seed);
        const ThermalResult t = temperature_from(tr, cfg, s);
        row.t_cm = t.estimate.temperature;
        row.t_cm_err = t.estimate.std_error;
        if (t.estimate.insufficient) errors += "temperature: too few batches after burn-in; ";
      } catch (const std::exception& e) {
        errors += std::string("temperature: ") + e.what() + "; ";
      }
    }
    if (sw.measure_damping) {
      try {
        const DampingFit f = measure_damping(s, row.seed);
        row.gamma_fit = f.rate;
        row.fit_residual = f.residual;
        row.fit_regime = f.overdamped ? "overdamped" : "envelope";
        if (f.poor_fit) errors += "damping: poor fit; ";
      } catch (const std::exception& e) {
        errors += std::string("damping: ") + e.what() + "; ";
      }
    }
    if (!errors.empty()) errors.resize(errors.size() - 2);
    row.error = errors;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> sweep(const RunConfig& cfg, unsigned workers = default_workers()) {
  if (!cfg.sweep) throw ConfigError("sweep: no sweep.axis configured");
  const SweepSpec& sw = *cfg.sweep;
  const std::size_t n = sw.values.size() * static_cast<std::size_t>(sw.replicates);
  return parallel_map(n, [&](std::size_t i) { return sweep_point(cfg, sw, i); }, workers);
}

inline std::string csv_text(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n') c = ';';
  }
  return s;
}

inline void write_sweep(std::ostream& os, const RunConfig& cfg, const std::vector<SweepRow>& rows) {
  write_header(os, cfg, "sweep");
  os << "# axis = " << cfg.sweep->axis << '\n';
  os << "index,value,replicate,seed,q_z,omega_z,gamma_res,gamma_gas,gamma_total,t_expected,t_cm,t_cm_err,"
        "gamma_fit,fit_residual,fit_regime,error\n";
  for (const auto& r : rows) {
    os << r.index << ',' << fmt(r.value) << ',' << r.replicate << ',' << r.seed << ',' << fmt(r.q_z) << ','
       << fmt(r.omega_z) << ',' << fmt(r.gamma_res) << ',' << fmt(r.gamma_gas) << ',' << fmt(r.gamma_total) << ','
       << fmt(r.t_expected) << ',' << fmt(r.t_cm) << ',' << fmt(r.t_cm_err) << ',' << fmt(r.gamma_fit) << ','
       << fmt(r.fit_residual) << ',' << r.fit_regime << ',' << csv_text(r.error) << '\n';
  }
}

inline void run_sweep(const RunConfig& cfg, std::ostream& os, unsigned workers = default_workers()) {
  write_sweep(os, cfg, sweep(cfg, workers));
}

// ---------------------------------------------------------------------------
// sense
// ---------------------------------------------------------------------------

struct SenseRow {
  double value = std::numeric_limits<double>::quiet_NaN();
  double radius = 0.0, charge_e = 0.0, temperature = 0.0, omega_z = 0.0, gamma = 0.0;
  double v_min = 0.0, z_min = 0.0;
  double f_min = std::numeric_limits<double>::quiet_NaN();
  double f_min_optimal = 0.0;
  double margin = 0.0;
  bool detectable = false;
  double q_over_sqrt_m = 0.0, max_mass_amu = 0.0;
  double z_zpf = 0.0, occupancy = 0.0;
  std::string note;
};

inline SenseRow sense_point(const RunConfig& cfg) {
  SenseRow r;
  const double omega_z = cfg.sense.omega_z ? *cfg.sense.omega_z : stability_params(cfg.trap, cfg.particle).omega_z;
  SensingQuery q{cfg.particle, cfg.trap, resolve_circuit(cfg.circuit, omega_z), cfg.sense.bandwidth, omega_z, 0.0};
  q.gamma = cfg.sense.gamma ? *cfg.sense.gamma : resistive_damping_rate(cfg.particle, cfg.trap, q.circuit);
  r.radius = cfg.particle.radius();
  r.charge_e = cfg.particle.charge_e();
  r.temperature = q.temperature();
  r.omega_z = omega_z;
  r.gamma = q.gamma;
  r.v_min = min_velocity(q);
  r.z_min = min_displacement(q);
  try {
    r.f_min = min_force(q);
  } catch (const BelowDetectionLimit& e) {
    r.note = e.what();
  }
  r.f_min_optimal = min_force_optimal(q);
  const DetectionResult det = detection_requirement(q);
  r.margin = det.margin;
  r.detectable = det.detectable;
  const DetectabilityBound b =
      detectable_charge_to_mass(cfg.trap, q.circuit, cfg.sense.bandwidth, cfg.particle.charge_e());
  r.q_over_sqrt_m = b.q_over_sqrt_m;
  r.max_mass_amu = kg_to_amu(b.max_mass);
  const ZeroPoint zp = zero_point_and_occupancy(cfg.particle, omega_z, r.temperature);
  r.z_zpf = zp.z_zpf;
  r.occupancy = zp.occupancy;
  return r;
}

inline void run_sense(const RunConfig& cfg, std::ostream& os) {
  std::vector<SenseRow> rows;
  if (cfg.sweep) {
    for (double v : cfg.sweep->values) {
      SenseRow r;
      try {
        r = sense_point(with_value(cfg, cfg.sweep->axis, v));
      } catch (const std::exception& e) {
        r.note = e.what();
      }
      r.value = v;
      rows.push_back(r);
    }
  } else {
    rows.push_back(sense_point(cfg));
  }
  write_header(os, cfg, "sense");
  if (cfg.sweep) os << "# axis = " << cfg.sweep->axis << '\n';
  os << "value,radius_m,charge_e,temperature_k,omega_z_rad_s,gamma_s,v_min_m_s,z_min_m,f_min_n,f_min_optimal_n,"
        "detection_margin,detectable,q_over_sqrt_m_threshold,max_mass_amu,z_zpf_m,occupancy,note\n";
  for (const auto& r : rows) {
    os << fmt(r.value) << ',' << fmt(r.radius) << ',' << fmt(r.charge_e) << ',' << fmt(r.temperature) << ','
       << fmt(r.omega_z) << ',' << fmt(r.gamma) << ',' << fmt(r.v_min) << ',' << fmt(r.z_min) << ','
       << fmt(r.f_min) << ',' << fmt(r.f_min_optimal) << ',' << fmt(r.margin) << ',' << (r.detectable ? 1 : 0)
       << ',' << fmt(r.q_over_sqrt_m) << ',' << fmt(r.max_mass_amu) << ',' << fmt(r.z_zpf) << ','
       << fmt(r.occupancy) << ',' << csv_text(r.note) << '\n';
  }
}

// ---------------------------------------------------------------------------
// quantum
// ---------------------------------------------------------------------------

struct QuantumReport {
  QuantumModel model;
  GaussianState state;
  bool hurwitz = false;
  Eigen::Matrix<std::complex<double>, 4, 1> spectrum;
  double occupancy = 0.0;
  double bose_einstein = 0.0;
  Eigen::Vector2d symplectic = Eigen::Vector2d::Zero();
  double residual = 0.0;
};

inline QuantumReport quantum_report(const RunConfig& cfg) {
  const double omega_z =
      cfg.quantum.omega_z ? *cfg.quantum.omega_z : stability_params(cfg.trap, cfg.particle).omega_z;
  const Circuit c = resolve_circuit(cfg.circuit, omega_z);
  QuantumReport r;
  r.model = make_quantum_model(cfg.particle, cfg.trap, c, omega_z, cfg.sim.potential, cfg.quantum.quantum_diffusion);
  r.spectrum = drift_spectrum(r.model);
  r.hurwitz = is_hurwitz(r.model);
  if (r.hurwitz) {
    r.state = steady_state(r.model);
    r.residual = lyapunov_residual(r.model, r.state);
  } else if (r.model.charge == 0.0) {
    r.state = steady_state_uncoupled(r.model);
  } else {
    throw NoSteadyState("drift matrix is not Hurwitz");
  }
  r.occupancy = occupancy(r.state, omega_z, r.model.mass);
  const double x = kHbar * omega_z / (kBoltzmann * r.model.temperature);
  r.bose_einstein = 1.0 / std::expm1(x);
  r.symplectic = symplectic_eigenvalues(r.state, r.model);
  return r;
}

inline void run_quantum(const RunConfig& cfg, std::ostream& os) {
  const QuantumReport r = quantum_report(cfg);
  write_header(os, cfg, "quantum");
  if (!r.hurwitz) os << "# note: uncharged particle; particle block is the thermal state at T_R\n";
  os << "name,value,unit\n";
  auto row = [&](const std::string& name, double v, const char* unit) {
    os << name << ',' << fmt(v) << ',' << unit << '\n';
  };
  row("omega_z", r.model.omega_z, "rad/s");
  row("omega_lc", r.model.omega_lc(), "rad/s");
  row("circuit_gamma", r.model.gamma, "1/s");
  row("temperature", r.model.temperature, "K");
  row("occupancy", r.occupancy, "1");
  row("occupancy_bose_einstein", r.bose_einstein, "1");
  row("occupancy_classical", kBoltzmann * r.model.temperature / (kHbar * r.model.omega_z), "1");
  row("hurwitz", r.hurwitz ? 1.0 : 0.0, "1");
  for (int i = 0; i < 4; ++i) {
    row("eigenvalue_" + std::to_string(i) + "_re", r.spectrum(i).real(), "1/s");
    row("eigenvalue_" + std::to_string(i) + "_im", r.spectrum(i).imag(), "1/s");
  }
  row("symplectic_min", r.symplectic(0), "hbar");
  row("symplectic_max", r.symplectic(1), "hbar");
  row("lyapunov_residual", r.residual, "1");
  static const char* names[4] = {"z", "p", "Q", "Phi"};
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      row(std::string("sigma_") + names[i] + "_" + names[j], r.state.cov(i, j), "SI");
    }
  }
}

}  // namespace levem
