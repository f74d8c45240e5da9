// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "levem/analysis.hpp"
#include "levem/ensemble.hpp"
#include "levem/feedback.hpp"
#include "levem/quantum_moments.hpp"
#include "levem/runs.hpp"
#include "levem/sensing.hpp"
#include "oracles.hpp"

using namespace levem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

bool within(double value, double target, double rel) { return std::abs(value / target - 1.0) <= rel; }

ChannelSet channels(bool gas, bool resistive, bool feedback, bool electrode) {
  return {gas, resistive, feedback, electrode};
}

SystemModel system_of(double charge_e, double u0, const CircuitConfig& cc, ChannelSet ch, NoiseEnvironment env = {},
                      FeedbackConfig fb = {}, Potential pot = Potential::Paul, Model model = Model::Reduced) {
  TrapConfig trap;
  trap.u0 = u0;
  return make_system(ParticleSpec(1e-6, 2200.0, charge_e), trap, cc, env, fb, model, pot, ch);
}

/// Per-trajectory kinetic temperatures after a 5/gamma burn-in, combined
/// across the ensemble.
TemperatureEstimate ensemble_run(const SystemModel& s, double duration, double t_in, std::size_t n,
                                 std::uint64_t seed0) {
  const double g = total_damping(s);
  SimPlan plan;
  plan.dt = std::min({default_dt(s), 1e-3 / g, 0.01 / fastest_rate(s)});
  plan.duration = duration;
  plan.output_decimation = 10;
  plan.initial_temperature = t_in;
  const auto temps = parallel_map(n, [&](std::size_t k) {
    const Trajectory tr = integrate(plan, s, seed0 + k);
    return estimate_temperature(tr, SecularFrame::of(s), 5.0 / g, 1.0 / g).temperature;
  });
  return ensemble_temperature(temps);
}

// 1 -------------------------------------------------------------------------
Outcome damping_law() {
  Outcome o;
  const std::array<double, 3> charges{1e4, 1e5, 1e6};
  for (double r : {1e6, 1e7, 1e8}) {
    CircuitConfig cc;
    cc.resistance = r;
    std::vector<double> lq, lg;
    for (double q : charges) {
      const SystemModel s = system_of(q, 300.0, cc, channels(false, true, false, false));
      const double k = q * oracle::e * 0.8 / 1e-3;
      const double expected = k * k * (100.0 * 100.0 * r) / oracle::sphere_mass(1e-6, 2200.0);
      const DampingFit f = measure_damping(s, 7);
      o.check(within(f.rate, expected, 0.1) && !f.poor_fit,
              "R=" + num(r) + " q=" + num(q) + "e: fit " + num(f.rate) + " vs " + num(expected) + " 1/s");
      lq.push_back(std::log(q));
      lg.push_back(std::log(f.rate));
    }
    const double mq = std::accumulate(lq.begin(), lq.end(), 0.0) / 3.0;
    const double mg = std::accumulate(lg.begin(), lg.end(), 0.0) / 3.0;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
      sxy += (lq[i] - mq) * (lg[i] - mg);
      sxx += (lq[i] - mq) * (lq[i] - mq);
    }
    const double slope = sxy / sxx;
    o.check(std::abs(slope - 2.0) <= 0.1, "R=" + num(r) + ": log-log slope " + num(slope));
  }
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome circuit_thermalization() {
  Outcome o;
  for (double t_r : {150.0, 300.0}) {
    NoiseEnvironment env;
    env.circuit_temperature = t_r;
    CircuitConfig cc;
    cc.temperature = t_r;
    const SystemModel s = system_of(1e5, 3000.0, cc, channels(false, true, false, false), env);
    const auto e = ensemble_run(s, 60.0 / s.gamma_res, 1000.0, 64, 1000);
    o.check(std::abs(e.temperature - t_r) <= 0.05 * t_r && e.std_error <= 0.05 * t_r,
            "T_R=" + num(t_r) + " K: T_CM " + num(e.temperature) + " +- " + num(e.std_error) + " K (64 runs)");
  }
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome feedback_equilibrium() {
  Outcome o;
  FeedbackConfig fb;
  fb.enabled = true;
  const double t_n = fb.noise_temperature();
  for (double g : {0.0, 0.5, 0.9, 0.95, 0.99}) {
    fb.gain = g;
    NoiseEnvironment env;
    env.feedback_noise_voltage = fb.noise_voltage;
    const SystemModel s = system_of(1e5, 3000.0, CircuitConfig{}, channels(false, true, true, false), env, fb);
    const double theory = (1.0 - g) * 300.0 + g * g * t_n / (1.0 - g);
    const auto e = ensemble_run(s, 45.0 / total_damping(s), theory, 48, 2000);
    o.check(std::abs(e.temperature - theory) <= 3.0 * e.std_error,
            "G=" + num(g) + ": T_CM " + num(e.temperature) + " +- " + num(e.std_error) + " K vs " + num(theory) + " K");
  }
  for (double r : {1e-2, 1e-3, 1e-4}) {
    const auto opt = optimal_gain(300.0, r * 300.0);
    const double approx = 1.0 - std::sqrt(r);
    o.check(within(opt.gain_exact, approx, 0.05),
            "T_n/T_R=" + num(r) + ": minimiser " + num(opt.gain_exact) + " vs " + num(approx));
  }
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome signal_level() {
  Outcome o;
  const ParticleSpec p(1e-6, 2200.0, 1e6);
  const TrapConfig trap;
  const Circuit c = resolve_circuit(CircuitConfig{}, stability_params(trap, p).omega_z);
  const double r_eff = effective_resistance(c, c.omega_lc);
  const double u = pickup_voltage(peak_current(p, trap, 300.0), r_eff);
  o.check(std::abs(r_eff / 1e12 - 1.0) < 1e-9, "R_eff " + num(r_eff) + " Ohm");
  o.check(u >= 0.060 && u <= 0.130, "peak pickup voltage " + num(u * 1e3) + " mV");
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome force_sensitivity() {
  Outcome o;
  for (auto [t, target] : {std::pair{300.0, 8e-19}, std::pair{5e-3, 3e-21}}) {
    CircuitConfig cc;
    cc.temperature = t;
    const ParticleSpec p(100e-9, 2200.0, 1e3);
    const double w = stability_params(TrapConfig{}, p).omega_z;
    const SensingQuery q{p, TrapConfig{}, resolve_circuit(cc, w), 1.0, w, 0.0};
    const double f = min_force_optimal(q);
    o.check(within(f, target, 0.2), "T=" + num(t) + " K: F_min " + num(f) + " N vs " + num(target));
  }
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome mass_limit() {
  Outcome o;
  const Circuit c = resolve_circuit(CircuitConfig{}, 18783.0);
  const double m = kg_to_amu(detectable_charge_to_mass(TrapConfig{}, c, 1.0, 1.0).max_mass);
  o.check(within(m, 5e6, 0.2), "M_max " + num(m) + " amu");
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome gas_damping() {
  Outcome o;
  const ParticleSpec p(1e-6, 2200.0, 1e5);
  for (auto [mbar, target] : {std::pair{100.0, 1e4}, std::pair{1e-8, 1e-6}}) {
    GasConfig gas;
    gas.pressure = mbar_to_pa(mbar);
    const double g = gas_damping_rate(p, gas);
    o.check(g >= target / 3.0 && g <= target * 3.0, num(mbar) + " mbar: gamma_gas " + num(g) + " 1/s");
  }

  // Relaxation of the mean secular energy of an ensemble kicked to 1e4 K.
  NoiseEnvironment env;
  env.gas.pressure = mbar_to_pa(100.0);
  TrapConfig trap;
  trap.drive_freq = hz_to_rad(1e6);
  trap.r0 = 150e-6;
  const SystemModel s = make_system(ParticleSpec(1e-6, 2200.0, 1e6), trap, CircuitConfig{}, env, FeedbackConfig{},
                                    Model::Reduced, Potential::Paul, channels(true, false, false, false));
  SimPlan plan;
  plan.dt = default_dt(s);
  plan.duration = 4.0 / s.gamma_gas;
  plan.initial_temperature = 1e4;
  const std::size_t n = 200;
  const SecularFrame f = SecularFrame::of(s);
  const auto energies = parallel_map(n, [&](std::size_t k) {
    const Trajectory tr = integrate(plan, s, 100 + k);
    std::vector<double> e(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) e[i] = secular_energy(f, to_secular(f, tr.t[i], tr.z[i], tr.v[i]));
    return std::make_pair(tr.t, e);
  });
  std::vector<double> t = energies.front().first, mean(t.size(), 0.0);
  for (const auto& [tt, e] : energies) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e[i] / n;
  }
  const DampingFit fit = fit_relaxation(t, mean, 300.0, 10.0 * kTwoPi / s.omega_drive);
  o.check(within(fit.rate, s.gamma_gas, 0.2) && !fit.poor_fit,
          "ensemble relaxation rate " + num(fit.rate) + " vs gamma_gas " + num(s.gamma_gas) + " 1/s");
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome charge_capacity() {
  Outcome o;
  const auto l = charge_limits(ParticleSpec(1e-6, 2200.0, 0.0), 3.9, 3e6);
  o.check(within(l.q_pos_max, 2.1e7, 0.05), "q_pos " + num(l.q_pos_max) + " e");
  return o;
}

// 9 -------------------------------------------------------------------------
QuantumModel quantum_model(double temperature, bool quantum) {
  CircuitConfig cc;
  cc.resistance = 1e4;
  cc.temperature = temperature;
  const double w = kTwoPi * 1e6;
  return make_quantum_model(ParticleSpec(1e-6, 2200.0, 1e6), TrapConfig{}, resolve_circuit(cc, w), w,
                            Potential::Harmonic, quantum);
}

Outcome quantum_moments() {
  Outcome o;
  const double w = kTwoPi * 1e6;
  {
    const QuantumModel m = quantum_model(5e-3, true);
    const Vec4 sc = m.scales();
    GaussianState x0;
    x0.mean = Vec4(30.0, -5.0, 12.0, 7.0).cwiseProduct(sc);
    const double k = m.charge / (m.capacitance * m.d);
    auto f = [&](double, const std::array<double, 4>& y) {
      return std::array<double, 4>{y[1] / m.mass, -m.mass * w * w * y[0] - k * y[2], y[3] / m.inductance,
                                   -y[2] / m.capacitance - k * y[0] - m.gamma * y[3]};
    };
    const double t = 100.0 * kTwoPi / w;
    const auto ref = oracle::rk4<4>(f, {x0.mean(0), x0.mean(1), x0.mean(2), x0.mean(3)}, 0.0, t, 400000);
    const GaussianState x = propagate(x0, m, t);
    double scale = 0.0, err = 0.0;
    for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(ref[i] / sc(i)));
    for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(x.mean(i) - ref[i]) / sc(i));
    o.check(err / scale <= 1e-8, "means vs classical integration over 100 periods: rel. error " + num(err / scale));
  }
  const double hw_k = oracle::hbar * w / oracle::kB;
  for (double n_be : {2.0, 10.0}) {
    const double t = hw_k / std::log1p(1.0 / n_be);
    const QuantumModel m = quantum_model(t, true);
    const double n = occupancy(steady_state(m), w, m.mass);
    o.check(within(n, n_be, 0.01), "Bose-Einstein n=" + num(n_be) + ": steady state " + num(n));
  }
  {
    const QuantumModel m = quantum_model(300.0, false);
    const double n = occupancy(steady_state(m), w, m.mass);
    const double classical = oracle::kB * 300.0 / (oracle::hbar * w);
    o.check(within(n + 0.5, classical, 0.01), "300 K equipartition: E/hw " + num(n + 0.5) + " vs " + num(classical));
  }
  {
    const QuantumModel m = quantum_model(5e-3, true);
    const double n = occupancy(steady_state(m), w, m.mass);
    o.check(std::abs(n - 104.0) <= 1.0, "5 mK, 1 MHz: n " + num(n));
  }
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome property_suites() {
  Outcome o;
  {
    SystemModel s;
    s.potential = Potential::Harmonic;
    s.channels = ChannelSet::none();
    s.mass = 1.0;
    s.omega_z = kTwoPi * 1e3;
    SimPlan plan;
    plan.dt = 1e-7;
    plan.duration = 1.0;
    plan.output_decimation = 10000;
    plan.initial_state = SimState{0.0, 0.0, 1e-6};
    const double e0 = 0.5e-12;
    double worst = 0.0;
    integrate_with(plan, s, 1, [&](const SimState& x) {
      worst = std::max(worst, std::abs((0.5 * x.p * x.p + 0.5 * s.omega_z * s.omega_z * x.z * x.z) / e0 - 1.0));
    });
    o.check(worst <= 1e-6, "energy drift over 1e3 periods " + num(worst));
  }
  {
    NoiseEnvironment gas;
    gas.gas.pressure = mbar_to_pa(100.0);
    gas.gas.temperature = 200.0;
    NoiseEnvironment res;
    res.circuit_temperature = 250.0;
    FeedbackConfig fb;
    fb.enabled = true;
    fb.gain = 0.5;
    fb.noise_voltage = feedback_noise_voltage(100.0, fb.amp_resistance, fb.bandwidth);
    NoiseEnvironment fbenv;
    fbenv.feedback_noise_voltage = fb.noise_voltage;
    NoiseEnvironment el = gas;
    el.gas.temperature = 300.0;
    el.electrode.g_e = 2e-14;
    struct Case {
      const char* name;
      SystemModel s;
    };
    const std::vector<Case> cases{
        {"gas", system_of(1e5, 3000.0, {}, channels(true, false, false, false), gas)},
        {"resistive", system_of(1e5, 3000.0, {}, channels(false, true, false, false), res)},
        {"feedback", system_of(1e5, 3000.0, {}, channels(false, true, true, false), fbenv, fb)},
        {"electrode", system_of(1e5, 3000.0, {}, channels(true, false, false, true), el)},
    };
    for (const auto& c : cases) {
      const double expected = expected_temperature(c.s);
      const auto e = ensemble_run(c.s, 200.0 / total_damping(c.s), expected, 16, 3000);
      o.check(std::abs(e.temperature - expected) <= 3.0 * e.std_error + 0.01 * expected,
              std::string("equipartition ") + c.name + ": " + num(e.temperature) + " +- " + num(e.std_error) +
                  " K vs " + num(expected) + " K");
    }
  }
  {
    bool same = true;
    for (Model m : {Model::Reduced, Model::Coupled}) {
      const SystemModel s = system_of(1e5, 3000.0, {}, channels(true, true, false, false), {}, {}, Potential::Paul, m);
      SimPlan plan;
      plan.dt = default_dt(s);
      plan.duration = 5000 * plan.dt;
      plan.initial_temperature = 300.0;
      const Trajectory a = integrate(plan, s, 42), b = integrate(plan, s, 42);
      same = same && a.z == b.z && a.v == b.v && a.Q == b.Q && a.Phi == b.Phi;
    }
    o.check(same, "seed determinism (bit-identical replay)");
  }
  {
    int agree = 0;
    for (int i = 1; i <= 20; ++i) {
      const double q = 0.05 * i;
      const bool stable = std::abs(oracle::mathieu_trace(0.0, q)) < 2.0;
      SystemModel s;
      s.potential = Potential::Paul;
      s.channels = ChannelSet::none();
      s.mass = 1.0;
      s.omega_drive = 1.0;
      s.q_z = q;
      s.omega_z = q / (2.0 * std::sqrt(2.0));
      SimPlan plan;
      plan.dt = kTwoPi / 400;
      plan.duration = 300 * kTwoPi;
      plan.output_decimation = 20;
      plan.initial_state = SimState{0.0, 1.0, 0.0};
      double peak = 0.0;
      try {
        integrate_with(plan, s, 1, [&](const SimState& x) { peak = std::max(peak, std::abs(x.z)); });
      } catch (const NumericalError&) {
        peak = INFINITY;
      }
      agree += (peak < 50.0) == stable && mathieu_floquet(0.0, q).stable == stable;
    }
    o.check(agree == 20, "Mathieu boundedness vs Floquet oracle: " + std::to_string(agree) + "/20");
  }
  {
    const SystemModel s = system_of(1e5, 3000.0, {}, channels(false, true, false, false));
    SimPlan plan;
    plan.dt = default_dt(s);
    plan.duration = 0.2;
    plan.output_decimation = 10;
    plan.initial_temperature = 300.0;
    const Trajectory tr = integrate(plan, s, 17);
    const Spectrum sp = estimate_psd(tr, 4096);
    const double m = std::accumulate(tr.z.begin(), tr.z.end(), 0.0) / tr.size();
    double var = 0.0;
    for (double z : tr.z) var += (z - m) * (z - m);
    var /= tr.size();
    o.check(within(sp.total_power(), var, 0.01), "PSD Parseval: ratio " + num(sp.total_power() / var));
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"damping-rate law", damping_law},
      {"circuit thermalization", circuit_thermalization},
      {"feedback equilibrium", feedback_equilibrium},
      {"signal level", signal_level},
      {"force sensitivity", force_sensitivity},
      {"mass detection limit", mass_limit},
      {"gas damping", gas_damping},
      {"charge capacity", charge_capacity},
      {"quantum moments", quantum_moments},
      {"property suites", property_suites},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("criterion %zu: %s  %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
