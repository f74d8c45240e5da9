#pragma once

// Run configuration: JSON with nested sections and unit-suffixed keys.
//
// The schema is the default document itself. Every user key must exist in
// it; `null` marks an optional value. Alternative spellings of one
// quantity (pressure_pa / pressure_mbar, quality_factor / inductance_h,
// sweep values / range) are mutually exclusive, and setting one clears the
// other. The resolved document is normalised (pressure in Pa, sweep values
// expanded) and serves as the snapshot embedded in every output.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "levem/core_model.hpp"
#include "levem/dynamics.hpp"
#include "levem/feedback.hpp"
#include "levem/noise_sources.hpp"

namespace levem {

using Json = nlohmann::ordered_json;

inline Json default_config() {
  return Json::parse(R"({
  "particle": {"radius_m": 1e-6, "density_kg_m3": 2200.0, "charge_e": 1e5,
               "relative_permittivity": 3.9, "charging_field_v_m": 3e6},
  "trap": {"u0_v": 3000.0, "udc_v": 0.0, "drive_freq_hz": 1e5, "r0_m": 5e-4, "d_m": 1e-3,
           "eta": 0.8, "r_prime_m": 5e-4},
  "circuit": {"topology": "series", "resistance_ohm": 1e8, "quality_factor": 100.0,
              "inductance_h": null, "temperature_k": 300.0},
  "feedback": {"enabled": false, "gain": 0.0, "noise_voltage_v": 1e-10, "amp_resistance_ohm": 50.0,
               "bandwidth_hz": 1.0, "allow_amplification": false},
  "gas": {"pressure_pa": null, "pressure_mbar": 1e-10, "temperature_k": 300.0, "molecule_mass_amu": 28.0},
  "electrode": {"g_e_si": 1e-12, "alpha": 1.0, "beta": 3.0, "chi": 2.0, "inverse_distance": true,
                "temperature_k": 300.0},
  "sim": {"model": "reduced", "potential": "paul", "duration_s": 0.5, "dt_s": null,
          "max_samples": 100000, "initial_temperature_k": 1000.0, "burn_in_s": null,
          "channels": ["gas", "resistive", "feedback"], "seed": 1},
  "sweep": {"axis": null, "values": null, "range": null, "replicates": 1, "seed_base": null,
            "measure": ["temperature", "damping"]},
  "sense": {"bandwidth_hz": 1.0, "omega_z_rad_s": null, "gamma_s": null},
  "quantum": {"quantum_diffusion": true, "omega_z_rad_s": null},
  "psd": {"segment_length": 4096, "overlap": 0.5}
})");
}

struct SimSection {
  Model model = Model::Reduced;
  Potential potential = Potential::Paul;
  double duration = 0.5;
  std::optional<double> dt;
  std::size_t max_samples = 100000;
  double initial_temperature = 1000.0;
  std::optional<double> burn_in;
  ChannelSet channels;
  std::uint64_t seed = 1;
};

struct SweepSpec {
  std::string axis;  // dotted path, e.g. "circuit.resistance_ohm"
  std::vector<double> values;
  int replicates = 1;
  std::uint64_t seed_base = 1;
  bool measure_temperature = true;
  bool measure_damping = true;
};

struct SenseSection {
  double bandwidth = 1.0;
  std::optional<double> omega_z;
  std::optional<double> gamma;
};

struct QuantumSection {
  bool quantum_diffusion = true;
  std::optional<double> omega_z;
};

struct PsdSection {
  std::size_t segment_length = 4096;
  double overlap = 0.5;
};

struct RunConfig {
  ParticleSpec particle{1e-6, 2200.0, 1e5};
  double relative_permittivity = 3.9;
  double charging_field = 3e6;
  TrapConfig trap;
  CircuitConfig circuit;
  FeedbackConfig feedback;
  GasConfig gas;
  ElectrodeNoiseModel electrode;
  double electrode_temperature = 300.0;
  SimSection sim;
  std::optional<SweepSpec> sweep;
  SenseSection sense;
  QuantumSection quantum;
  PsdSection psd;
  Json resolved;

  NoiseEnvironment environment() const {
    NoiseEnvironment e;
    e.gas = gas;
    e.circuit_temperature = circuit.temperature;
    e.feedback_noise_voltage = feedback.noise_voltage;
    e.amp_resistance = feedback.amp_resistance;
    e.amp_bandwidth = feedback.bandwidth;
    e.electrode = electrode;
    e.electrode_temperature = electrode_temperature;
    e.rng_seed = sim.seed;
    return e;
  }

  SystemModel system() const {
    return make_system(particle, trap, circuit, environment(), feedback, sim.model, sim.potential, sim.channels);
  }

  /// One-line JSON of the resolved configuration.
  std::string snapshot() const { return resolved.dump(); }
};

namespace detail {

inline const std::map<std::string, std::string>& alternatives() {
  static const std::map<std::string, std::string> m = {
      {"gas.pressure_pa", "gas.pressure_mbar"},   {"gas.pressure_mbar", "gas.pressure_pa"},
      {"circuit.quality_factor", "circuit.inductance_h"}, {"circuit.inductance_h", "circuit.quality_factor"},
      {"sweep.values", "sweep.range"},           {"sweep.range", "sweep.values"}};
  return m;
}

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    parts.emplace_back(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (parts.back().empty()) throw ConfigError("malformed key path '" + std::string(path) + "'");
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (parts.size() != 2) throw ConfigError("key path must be section.key, got '" + std::string(path) + "'");
  return parts;
}

/// Sets section.key, clearing the alternative spelling.
inline void set_path(Json& doc, std::string_view path, const Json& value) {
  const auto parts = split_path(path);
  const Json schema = default_config();
  if (!schema.contains(parts[0])) throw ConfigError("unknown section '" + parts[0] + "'");
  if (!schema[parts[0]].contains(parts[1])) {
    throw ConfigError("unknown key '" + std::string(path) + "'");
  }
  doc[parts[0]][parts[1]] = value;
  const auto alt = alternatives().find(std::string(path));
  if (alt != alternatives().end() && !value.is_null()) {
    const auto other = split_path(alt->second);
    doc[other[0]][other[1]] = nullptr;
  }
}

inline bool type_matches(const Json& schema_value, const Json& v) {
  if (v.is_null()) return true;
  if (schema_value.is_null() || schema_value.is_number()) return v.is_number() || schema_value.is_null();
  if (schema_value.is_boolean()) return v.is_boolean();
  if (schema_value.is_string()) return v.is_string();
  if (schema_value.is_array()) return v.is_array();
  return v.is_object();
}

inline double number(const Json& doc, const char* section, const char* key) {
  const Json& v = doc.at(section).at(key);
  if (!v.is_number()) throw ConfigError(std::string(section) + "." + key + " must be a number");
  return v.get<double>();
}

inline std::optional<double> optional_number(const Json& doc, const char* section, const char* key) {
  const Json& v = doc.at(section).at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ConfigError(std::string(section) + "." + key + " must be a number or null");
  return v.get<double>();
}

inline std::vector<double> expand_range(const Json& r) {
  if (!r.is_object()) throw ConfigError("sweep.range must be an object {start, stop, count, scale}");
  for (const auto& [k, v] : r.items()) {
    if (k != "start" && k != "stop" && k != "count" && k != "scale") {
      throw ConfigError("unknown key 'sweep.range." + k + "'");
    }
  }
  if (!r.contains("start") || !r.contains("stop") || !r.contains("count")) {
    throw ConfigError("sweep.range needs start, stop and count");
  }
  const double a = r.at("start").get<double>();
  const double b = r.at("stop").get<double>();
  const int n = r.at("count").get<int>();
  const std::string scale = r.value("scale", "linear");
  if (n < 1) throw ConfigError("sweep.range.count must be >= 1");
  if (scale != "linear" && scale != "log") throw ConfigError("sweep.range.scale must be 'linear' or 'log'");
  if (scale == "log" && !(a > 0.0 && b > 0.0)) throw ConfigError("log sweep range needs positive bounds");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    v[i] = scale == "log" ? std::exp(std::log(a) + f * (std::log(b) - std::log(a))) : a + f * (b - a);
  }
  return v;
}

}  // namespace detail

/// Merges `user` into the defaults, rejecting unknown keys and type
/// mismatches. The result still contains alternative spellings.
inline Json merge_config(const Json& user) {
  Json doc = default_config();
  if (user.is_null()) return doc;
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [section, body] : user.items()) {
    if (!doc.contains(section)) throw ConfigError("unknown section '" + section + "'");
    if (!body.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string path = section + "." + key;
      const Json schema = default_config();
      if (!schema[section].contains(key)) throw ConfigError("unknown key '" + path + "'");
      if (!detail::type_matches(schema[section][key], value)) {
        throw ConfigError("wrong type for '" + path + "'");
      }
      const auto alt = detail::alternatives().find(path);
      if (alt != detail::alternatives().end() && !value.is_null()) {
        const auto other = detail::split_path(alt->second);
        if (body.contains(other[1]) && !body[other[1]].is_null()) {
          throw ConfigError("give only one of '" + path + "' and '" + alt->second + "'");
        }
      }
      detail::set_path(doc, path, value);
    }
  }
  return doc;
}

/// Applies one "section.key=value" override; the value is parsed as JSON
/// when possible and taken as a string otherwise.
inline void apply_override(Json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value, got '" + std::string(assignment) + "'");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  const auto parts = detail::split_path(path);
  const Json schema = default_config();
  if (!schema.contains(parts[0]) || !schema[parts[0]].contains(parts[1])) {
    throw ConfigError("unknown key '" + path + "'");
  }
  if (!detail::type_matches(schema[parts[0]][parts[1]], value)) throw ConfigError("wrong type for '" + path + "'");
  detail::set_path(doc, path, value);
}

namespace detail {

inline Topology parse_topology(const std::string& s) {
  if (s == "series") return Topology::Series;
  if (s == "parallel") return Topology::Parallel;
  throw ConfigError("circuit.topology must be 'series' or 'parallel'");
}

inline Model parse_model(const std::string& s) {
  if (s == "reduced") return Model::Reduced;
  if (s == "coupled") return Model::Coupled;
  throw ConfigError("sim.model must be 'reduced' or 'coupled'");
}

inline Potential parse_potential(const std::string& s) {
  if (s == "paul") return Potential::Paul;
  if (s == "harmonic") return Potential::Harmonic;
  throw ConfigError("sim.potential must be 'paul' or 'harmonic'");
}

}  // namespace detail

/// Builds a RunConfig from a merged document. Domain validation errors are
/// reported as ConfigError.
inline RunConfig resolve_config(Json doc) {
  using detail::number;
  using detail::optional_number;
  RunConfig c;
  try {
    c.particle = ParticleSpec(number(doc, "particle", "radius_m"), number(doc, "particle", "density_kg_m3"),
                              number(doc, "particle", "charge_e"));
    c.relative_permittivity = number(doc, "particle", "relative_permittivity");
    c.charging_field = number(doc, "particle", "charging_field_v_m");
    pauthenier_factor(c.relative_permittivity);

    c.trap.u0 = number(doc, "trap", "u0_v");
    c.trap.udc = number(doc, "trap", "udc_v");
    c.trap.drive_freq = hz_to_rad(number(doc, "trap", "drive_freq_hz"));
    c.trap.r0 = number(doc, "trap", "r0_m");
    c.trap.d = number(doc, "trap", "d_m");
    c.trap.eta = number(doc, "trap", "eta");
    c.trap.r_prime = number(doc, "trap", "r_prime_m");
    c.trap.validate();

    c.circuit.topology = detail::parse_topology(doc["circuit"]["topology"].get<std::string>());
    c.circuit.resistance = number(doc, "circuit", "resistance_ohm");
    c.circuit.quality_factor = optional_number(doc, "circuit", "quality_factor");
    c.circuit.inductance = optional_number(doc, "circuit", "inductance_h");
    c.circuit.temperature = number(doc, "circuit", "temperature_k");
    c.circuit.validate();

    c.feedback.enabled = doc["feedback"]["enabled"].get<bool>();
    c.feedback.gain = number(doc, "feedback", "gain");
    c.feedback.noise_voltage = number(doc, "feedback", "noise_voltage_v");
    c.feedback.amp_resistance = number(doc, "feedback", "amp_resistance_ohm");
    c.feedback.bandwidth = number(doc, "feedback", "bandwidth_hz");
    c.feedback.allow_amplification = doc["feedback"]["allow_amplification"].get<bool>();
    c.feedback.validate();

    const auto p_pa = optional_number(doc, "gas", "pressure_pa");
    const auto p_mbar = optional_number(doc, "gas", "pressure_mbar");
    if (p_pa.has_value() == p_mbar.has_value()) {
      throw ConfigError("give exactly one of gas.pressure_pa and gas.pressure_mbar");
    }
    c.gas.pressure = p_pa ? *p_pa : mbar_to_pa(*p_mbar);
    c.gas.temperature = number(doc, "gas", "temperature_k");
    c.gas.molecule_mass = amu_to_kg(number(doc, "gas", "molecule_mass_amu"));
    c.gas.validate();

    c.electrode.g_e = number(doc, "electrode", "g_e_si");
    c.electrode.alpha = number(doc, "electrode", "alpha");
    c.electrode.beta = number(doc, "electrode", "beta");
    c.electrode.chi = number(doc, "electrode", "chi");
    c.electrode.inverse_distance = doc["electrode"]["inverse_distance"].get<bool>();
    c.electrode_temperature = number(doc, "electrode", "temperature_k");
    if (!(c.electrode.g_e >= 0.0)) throw ConfigError("electrode.g_e_si must be >= 0");
    if (!(c.electrode_temperature >= 0.0)) throw ConfigError("electrode.temperature_k must be >= 0");

    const Json& sim = doc["sim"];
    c.sim.model = detail::parse_model(sim["model"].get<std::string>());
    c.sim.potential = detail::parse_potential(sim["potential"].get<std::string>());
    c.sim.duration = number(doc, "sim", "duration_s");
    c.sim.dt = optional_number(doc, "sim", "dt_s");
    const double max_samples = number(doc, "sim", "max_samples");
    if (!(max_samples >= 2.0)) throw ConfigError("sim.max_samples must be >= 2");
    c.sim.max_samples = static_cast<std::size_t>(max_samples);
    c.sim.initial_temperature = number(doc, "sim", "initial_temperature_k");
    c.sim.burn_in = optional_number(doc, "sim", "burn_in_s");
    if (!(c.sim.duration > 0.0)) throw ConfigError("sim.duration_s must be positive");
    if (c.sim.dt && !(*c.sim.dt > 0.0)) throw ConfigError("sim.dt_s must be positive");
    if (!(c.sim.initial_temperature >= 0.0)) throw ConfigError("sim.initial_temperature_k must be >= 0");
    c.sim.channels = ChannelSet::none();
    for (const auto& ch : sim["channels"]) {
      const std::string name = ch.get<std::string>();
      if (name == "gas") c.sim.channels.gas = true;
      else if (name == "resistive") c.sim.channels.resistive = true;
      else if (name == "feedback") c.sim.channels.feedback = true;
      else if (name == "electrode") c.sim.channels.electrode = true;
      else throw ConfigError("unknown noise channel '" + name + "'");
    }
    const double seed = number(doc, "sim", "seed");
    if (!(seed >= 0.0) || seed != std::floor(seed)) throw ConfigError("sim.seed must be a non-negative integer");
    c.sim.seed = static_cast<std::uint64_t>(seed);

    const Json& sw = doc["sweep"];
    std::vector<double> values;
    if (!sw["values"].is_null() && !sw["range"].is_null()) {
      throw ConfigError("give only one of sweep.values and sweep.range");
    }
    if (!sw["values"].is_null()) {
      for (const auto& v : sw["values"]) {
        if (!v.is_number()) throw ConfigError("sweep.values must be numbers");
        values.push_back(v.get<double>());
      }
    } else if (!sw["range"].is_null()) {
      values = detail::expand_range(sw["range"]);
    }
    if (!sw["axis"].is_null()) {
      SweepSpec s;
      s.axis = sw["axis"].get<std::string>();
      const auto parts = detail::split_path(s.axis);
      const Json schema = default_config();
      if (!schema.contains(parts[0]) || !schema[parts[0]].contains(parts[1]) || parts[0] == "sweep") {
        throw ConfigError("sweep.axis '" + s.axis + "' is not a configuration key");
      }
      if (values.empty()) throw ConfigError("sweep needs at least one value");
      s.values = values;
      const double reps = number(doc, "sweep", "replicates");
      if (!(reps >= 1.0) || reps != std::floor(reps)) throw ConfigError("sweep.replicates must be an integer >= 1");
      s.replicates = static_cast<int>(reps);
      const auto base = optional_number(doc, "sweep", "seed_base");
      s.seed_base = base ? static_cast<std::uint64_t>(*base) : c.sim.seed;
      s.measure_temperature = s.measure_damping = false;
      for (const auto& m : sw["measure"]) {
        const std::string name = m.get<std::string>();
        if (name == "temperature") s.measure_temperature = true;
        else if (name == "damping") s.measure_damping = true;
        else throw ConfigError("unknown sweep measurement '" + name + "'");
      }
      c.sweep = s;
      doc["sweep"]["values"] = values;
      doc["sweep"]["range"] = nullptr;
    } else if (!values.empty()) {
      throw ConfigError("sweep values given without sweep.axis");
    }

    c.sense.bandwidth = number(doc, "sense", "bandwidth_hz");
    c.sense.omega_z = optional_number(doc, "sense", "omega_z_rad_s");
    c.sense.gamma = optional_number(doc, "sense", "gamma_s");
    if (!(c.sense.bandwidth > 0.0)) throw ConfigError("sense.bandwidth_hz must be positive");

    c.quantum.quantum_diffusion = doc["quantum"]["quantum_diffusion"].get<bool>();
    c.quantum.omega_z = optional_number(doc, "quantum", "omega_z_rad_s");

    const double seg = number(doc, "psd", "segment_length");
    if (!(seg >= 8.0) || seg != std::floor(seg)) throw ConfigError("psd.segment_length must be an integer >= 8");
    c.psd.segment_length = static_cast<std::size_t>(seg);
    c.psd.overlap = number(doc, "psd", "overlap");
    if (!(c.psd.overlap >= 0.0 && c.psd.overlap < 1.0)) throw ConfigError("psd.overlap must lie in [0, 1)");
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  // Normalised snapshot.
  doc["gas"]["pressure_pa"] = c.gas.pressure;
  doc["gas"]["pressure_mbar"] = nullptr;
  c.resolved = std::move(doc);
  return c;
}

/// Reads a configuration from JSON text. Text starting with '#' is taken
/// to be an output file and the embedded `# config = {...}` line is used,
/// so any report can be replayed.
inline Json parse_config_text(const std::string& text) {
  std::string body = text;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '#') {
    std::istringstream in(text);
    body.clear();
    for (std::string line; std::getline(in, line);) {
      static const std::string tag = "# config = ";
      if (line.rfind(tag, 0) == 0) {
        body = line.substr(tag.size());
        break;
      }
    }
    if (body.empty()) throw ConfigError("no '# config = ' line in the given file");
  }
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return Json::object();
  try {
    return Json::parse(body, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
}

inline RunConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides = {},
                             std::optional<std::uint64_t> seed = std::nullopt) {
  Json user = Json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read configuration file '" + *path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    user = parse_config_text(ss.str());
  }
  Json doc = merge_config(user);
  for (const auto& o : overrides) apply_override(doc, o);
  if (seed) doc["sim"]["seed"] = *seed;
  return resolve_config(std::move(doc));
}

/// The configuration with one key replaced (used by sweeps).
inline RunConfig with_value(const RunConfig& base, const std::string& path, const Json& value) {
  Json doc = base.resolved;
  detail::set_path(doc, path, value);
  return resolve_config(std::move(doc));
}

}  // namespace levem
