// levem command-line driver.
//
// Exit codes: 0 success, 1 usage, 2 configuration, 3 stability, 4 runtime.

#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levem/runs.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  unsigned workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON configuration (or a previous output file to replay)");
  cmd->add_option("--seed", o.seed, "RNG seed (overrides sim.seed)");
  cmd->add_option("--out", o.out, "output directory (default: stdout)");
  cmd->add_option("--set", o.sets, "override, section.key=value (repeatable)");
}

class Output {
 public:
  explicit Output(const std::string& dir) : dir_(dir) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }

  /// A file in the output directory, or `fallback` without --out.
  std::ostream& stream(const std::string& name, std::ostream& fallback) {
    if (dir_.empty()) return fallback;
    files_.emplace_back(std::filesystem::path(dir_) / name);
    if (!files_.back()) throw levem::Error("cannot write " + (std::filesystem::path(dir_) / name).string());
    return files_.back();
  }

 private:
  std::string dir_;
  std::deque<std::ofstream> files_;  // references must stay valid
};

levem::RunConfig load(const CommonOptions& o) {
  return levem::load_config(o.config.empty() ? std::nullopt : std::optional<std::string>(o.config), o.sets, o.seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electromechanical simulation of charged particles in ion traps"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* derive = app.add_subcommand("derive", "closed-form parameter report");
  auto* simulate = app.add_subcommand("simulate", "stochastic trajectory and temperature estimate");
  auto* sweep = app.add_subcommand("sweep", "parameter sweep with simulated T_CM and fitted damping");
  auto* sense = app.add_subcommand("sense", "detection and force-sensitivity limits");
  auto* quantum = app.add_subcommand("quantum", "Gaussian steady state of the particle-circuit system");
  auto* psd = app.add_subcommand("psd", "power spectral density of the simulated motion");
  for (auto* cmd : {derive, simulate, sweep, sense, quantum, psd}) add_common(cmd, opts);
  sweep->add_option("--workers", opts.workers, "worker threads (default: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const levem::RunConfig cfg = load(opts);
    Output out(opts.out);
    if (derive->parsed()) {
      levem::run_derive(cfg, out.stream("derive.csv", std::cout));
    } else if (simulate->parsed()) {
      levem::run_simulate(cfg, out.stream("trajectory.csv", std::cout), out.stream("summary.csv", std::cerr));
    } else if (sweep->parsed()) {
      levem::run_sweep(cfg, out.stream("sweep.csv", std::cout),
                       opts.workers > 0 ? opts.workers : levem::default_workers());
    } else if (sense->parsed()) {
      levem::run_sense(cfg, out.stream("sense.csv", std::cout));
    } else if (quantum->parsed()) {
      levem::run_quantum(cfg, out.stream("quantum.csv", std::cout));
    } else if (psd->parsed()) {
      levem::run_psd(cfg, out.stream("psd.csv", std::cout));
    }
  } catch (const levem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const levem::InvalidParameter& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const levem::UnsupportedPotential& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const levem::StabilityError& e) {
    std::cerr << "stability error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
