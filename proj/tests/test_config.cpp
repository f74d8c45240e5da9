#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "levem/config.hpp"
#include "levem/runs.hpp"

using namespace levem;

namespace {

RunConfig from_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
  Json doc = merge_config(parse_config_text(text));
  for (const auto& o : overrides) apply_override(doc, o);
  return resolve_config(std::move(doc));
}

}  // namespace

TEST(Config, DefaultsResolve) {
  const RunConfig c = from_text("");
  EXPECT_EQ(c.particle.charge_e(), 1e5);
  EXPECT_EQ(c.circuit.resistance, 1e8);
  EXPECT_NEAR(c.gas.pressure, mbar_to_pa(1e-10), 1e-20);
  EXPECT_TRUE(c.sim.channels.resistive);
  EXPECT_FALSE(c.sim.channels.electrode);
  EXPECT_FALSE(c.sweep.has_value());
}

TEST(Config, UnknownKeyAndWrongType) {
  EXPECT_THROW(from_text(R"({"particle": {"radius": 1e-6}})"), ConfigError);
  EXPECT_THROW(from_text(R"({"partikel": {}})"), ConfigError);
  EXPECT_THROW(from_text(R"({"particle": {"radius_m": "big"}})"), ConfigError);
  EXPECT_THROW(from_text(R"({"sim": {"channels": "gas"}})"), ConfigError);
  EXPECT_THROW(from_text(R"({"sim": {"model": "quantum"}})"), ConfigError);
  EXPECT_THROW(from_text("{ not json"), ConfigError);
  EXPECT_THROW(from_text("", {"trap.u0=1"}), ConfigError);
}

TEST(Config, AlternativeSpellings) {
  EXPECT_THROW(from_text(R"({"gas": {"pressure_pa": 1.0, "pressure_mbar": 1.0}})"), ConfigError);
  EXPECT_NEAR(from_text(R"({"gas": {"pressure_pa": 10.0}})").gas.pressure, 10.0, 1e-12);
  EXPECT_NEAR(from_text(R"({"gas": {"pressure_mbar": 1.0}})").gas.pressure, 100.0, 1e-12);
  const RunConfig l = from_text(R"({"circuit": {"inductance_h": 2.0}})");
  EXPECT_EQ(*l.circuit.inductance, 2.0);
  EXPECT_FALSE(l.circuit.quality_factor.has_value());
  EXPECT_THROW(from_text(R"({"circuit": {"inductance_h": 2.0, "quality_factor": 5.0}})"), ConfigError);
}

TEST(Config, Overrides) {
  const RunConfig c = from_text("", {"particle.charge_e=2e4", "circuit.topology=parallel", "gas.pressure_pa=3",
                                     "sim.channels=[\"gas\"]"});
  EXPECT_EQ(c.particle.charge_e(), 2e4);
  EXPECT_EQ(c.circuit.topology, Topology::Parallel);
  EXPECT_NEAR(c.gas.pressure, 3.0, 1e-12);
  EXPECT_TRUE(c.sim.channels.gas);
  EXPECT_FALSE(c.sim.channels.resistive);
  EXPECT_THROW(from_text("", {"particle.charge_e"}), ConfigError);
  EXPECT_THROW(from_text("", {"=3"}), ConfigError);
  EXPECT_THROW(from_text("", {"particle.charge_e=abc"}), ConfigError);
  EXPECT_THROW(from_text("", {"sim.channels=[\"magic\"]"}), ConfigError);
}

TEST(Config, InvalidValuesAreConfigErrors) {
  EXPECT_THROW(from_text("", {"particle.radius_m=-1"}), ConfigError);
  EXPECT_THROW(from_text("", {"trap.eta=1.5"}), ConfigError);
  EXPECT_THROW(from_text("", {"circuit.resistance_ohm=0"}), ConfigError);
}

TEST(Config, SweepRange) {
  const RunConfig lin =
      from_text(R"({"sweep": {"axis": "circuit.resistance_ohm", "range": {"start": 1, "stop": 3, "count": 3}}})");
  ASSERT_TRUE(lin.sweep.has_value());
  EXPECT_EQ(lin.sweep->values, (std::vector<double>{1.0, 2.0, 3.0}));
  const RunConfig lg = from_text(
      R"({"sweep": {"axis": "circuit.resistance_ohm", "range": {"start": 1e6, "stop": 1e8, "count": 3, "scale": "log"}}})");
  EXPECT_NEAR(lg.sweep->values[1], 1e7, 1e-3);
  EXPECT_THROW(from_text(R"({"sweep": {"axis": "circuit.resistance_ohm", "values": [1], "range": {"start": 1,
                            "stop": 2, "count": 2}}})"),
               ConfigError);
  EXPECT_THROW(from_text(R"({"sweep": {"axis": "circuit.nothing", "values": [1]}})"), ConfigError);
  EXPECT_THROW(from_text(R"({"sweep": {"axis": "circuit.resistance_ohm", "range": {"start": -1, "stop": 2,
                            "count": 2, "scale": "log"}}})"),
               ConfigError);
}

TEST(Config, ReportReplaysToSameConfiguration) {
  const RunConfig c = from_text(R"({"particle": {"charge_e": 3e4}, "gas": {"pressure_mbar": 2e-3}})", {"sim.seed=9"});
  std::ostringstream report;
  run_derive(c, report);
  const RunConfig back = from_text(report.str());
  EXPECT_EQ(back.snapshot(), c.snapshot());
  std::ostringstream again;
  run_derive(back, again);
  EXPECT_EQ(again.str(), report.str());
  EXPECT_THROW(from_text("# just a comment\n"), ConfigError);
}

TEST(Config, SweepOrderIndependentOfWorkers) {
  RunConfig c = from_text(
      R"({"circuit": {"resistance_ohm": 1e7}, "trap": {"u0_v": 300},
          "sim": {"channels": ["resistive"], "duration_s": 0.01},
          "sweep": {"axis": "particle.charge_e", "values": [3e4, 1e4, 2e4], "replicates": 2,
                    "measure": ["temperature"]}})");
  std::ostringstream one, three;
  write_sweep(one, c, sweep(c, 1));
  write_sweep(three, c, sweep(c, 3));
  EXPECT_EQ(one.str(), three.str());
  const auto rows = sweep(c, 2);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].value, 3e4);
  EXPECT_EQ(rows[5].value, 2e4);
  EXPECT_EQ(rows[1].replicate, 1);
}

TEST(Config, SampleConfigsLoad) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(LEVEM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 5);
}

TEST(Config, SeedArgumentWins) {
  const RunConfig c = load_config(std::nullopt, {"sim.seed=3"}, 77);
  EXPECT_EQ(c.sim.seed, 77u);
}
