#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string("\"") + LEVEM_CLI + "\" " + args + " > \"" + stdout_file + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("levem_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config(const std::string& name) { return std::string(LEVEM_CONFIG_DIR) + "/" + name; }

/// Value column of a name,value,unit row.
double value_of(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(name + ",", 0) == 0) {
      const auto a = line.find(',');
      return std::stod(line.substr(a + 1, line.find(',', a + 1) - a - 1));
    }
  }
  return std::nan("");
}

}  // namespace

TEST(Cli, DeriveSucceeds) {
  const fs::path dir = scratch("derive");
  EXPECT_EQ(run("derive", (dir / "out.csv").string()), 0);
  const std::string text = slurp(dir / "out.csv");
  EXPECT_NE(text.find("# config = "), std::string::npos);
  EXPECT_NEAR(value_of(text, "q_z"), -0.0846, 0.0005);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("derive --set particle.radius=1"), 2);
  EXPECT_EQ(run("derive --set trap.eta=2"), 2);
  EXPECT_EQ(run("derive --config /nonexistent/levem.json"), 2);
  EXPECT_EQ(run("quantum --set sim.potential=paul"), 2);
}

TEST(Cli, StabilityErrorsExitThree) {
  EXPECT_EQ(run("simulate --set particle.charge_e=0 --set sim.duration_s=0.001"), 3);
  EXPECT_EQ(run("simulate --set particle.charge_e=1.1e6 --set sim.duration_s=0.001"), 3);
  EXPECT_EQ(run("simulate --set sim.dt_s=1e-4 --set sim.duration_s=0.01"), 3);
}

TEST(Cli, BadUsage) { EXPECT_NE(run("simulate --bogus"), 0); }

TEST(Cli, SimulateIsReproducible) {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b"), c = scratch("sim_c");
  const std::string args = " --config " + config("defaults.json") + " --set sim.duration_s=0.01 --seed 42 --out ";
  ASSERT_EQ(run("simulate" + args + a.string()), 0);
  ASSERT_EQ(run("simulate" + args + b.string()), 0);
  ASSERT_EQ(run("simulate --config " + config("defaults.json") + " --set sim.duration_s=0.01 --seed 43 --out " +
                c.string()),
            0);
  const std::string ta = slurp(a / "trajectory.csv");
  ASSERT_FALSE(ta.empty());
  EXPECT_EQ(ta, slurp(b / "trajectory.csv"));
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_NE(ta, slurp(c / "trajectory.csv"));
}

TEST(Cli, ReplayFromOutputFile) {
  const fs::path dir = scratch("replay");
  ASSERT_EQ(run("derive --set particle.charge_e=4e4", (dir / "first.csv").string()), 0);
  ASSERT_EQ(run("derive --config " + (dir / "first.csv").string(), (dir / "second.csv").string()), 0);
  EXPECT_EQ(slurp(dir / "first.csv"), slurp(dir / "second.csv"));
}

TEST(Cli, SenseForceLimit) {
  const fs::path dir = scratch("sense");
  ASSERT_EQ(run("sense --set particle.radius_m=1e-7 --set particle.charge_e=1e3", (dir / "s.csv").string()), 0);
  const std::string text = slurp(dir / "s.csv");
  std::istringstream in(text);
  std::string line, header, row;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) header = line;
    else row = line;
  }
  ASSERT_FALSE(row.empty());
  // f_min_optimal is the tenth column.
  std::istringstream cells(row);
  std::string cell;
  for (int i = 0; i < 10; ++i) std::getline(cells, cell, ',');
  EXPECT_NEAR(std::stod(cell) / 8e-19, 1.0, 0.2);
}

TEST(Cli, QuantumReport) {
  const fs::path dir = scratch("quantum");
  ASSERT_EQ(run("quantum --config " + config("quantum_5mK.json"), (dir / "q.csv").string()), 0);
  EXPECT_NEAR(value_of(slurp(dir / "q.csv"), "occupancy"), 104.0, 1.0);
  ASSERT_EQ(run("quantum --config " + config("quantum_5mK.json") + " --set particle.charge_e=0",
                (dir / "q0.csv").string()),
            0);
  const std::string q0 = slurp(dir / "q0.csv");
  EXPECT_NE(q0.find("uncharged"), std::string::npos);
  EXPECT_NEAR(value_of(q0, "occupancy"), value_of(q0, "occupancy_bose_einstein"), 1e-6 * 104.0);
}

TEST(Cli, SweepWritesRows) {
  const fs::path dir = scratch("sweep");
  ASSERT_EQ(run("sweep --config " + config("damping_vs_resistance.json") + " --out " + dir.string()), 0);
  bool any = false;
  for (const auto& e : fs::directory_iterator(dir)) any |= fs::file_size(e.path()) > 0;
  EXPECT_TRUE(any);
}
