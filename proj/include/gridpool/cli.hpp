#pragma once

// Subcommands of the gridpool executable. Each returns a process exit code.

#include "gridpool/profiles.hpp"
#include "gridpool/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace gridpool {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitInfeasible = 3,
  kExitNotConverged = 4,
};

struct RunOptions {
  std::string scenario;
  std::string out = "out";
  ScenarioOverrides overrides;
  bool quiet = false;
};

struct TopologyOptions {
  std::string topology = "complete";
  std::size_t agents = 0;  // taken from the scenario when 0
  std::string scenario;
};

struct SynthOptions {
  std::string out = "out";
  std::uint64_t seed = 0;
  std::size_t agents = 10;
  ArchetypeMix mix;
  std::string topology = "complete";
  double epsilon = 0.002;
};

/// Per-agent benchmark costs and schedules.
int cmd_standalone(const RunOptions& options, std::ostream& log);
/// Consensus run; writes the trace, schedules, prices and clearing residuals.
int cmd_coordinated(const RunOptions& options, std::ostream& log);
/// Both modes and their per-agent and system cost reductions.
int cmd_compare(const RunOptions& options, std::ostream& log);
/// Adjacency, Metropolis weights, row/column sums and spectral gap.
int cmd_topology(const TopologyOptions& options, std::ostream& log);
/// Writes scenario.json and profiles.csv for a synthetic day.
int cmd_synth(const SynthOptions& options, std::ostream& log);

/// Scenario text written by cmd_synth, referring to `profiles_csv`.
std::string synth_scenario_json(const SynthOptions& options, const std::string& profiles_csv);

/// Full command line handling, including --help.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridpool
