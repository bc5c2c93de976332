#pragma once
// Command implementations behind the amod tool: scenario analysis, policy
// synthesis, fleet-size sweeps, simulation validation, and congestion
// reporting. Each command writes schema-stable CSV files (plus JSON policy
// documents) into an output directory; every CSV row carries the scenario
// hash and the mode it was produced under.

#include <string>
#include <vector>

#include "amod/scenario.hpp"
#include "amod/simulator.hpp"

namespace amod {

// Formats a value the way every CSV cell is written ("%.12g").
std::string csv_number(double value);

struct AnalyzeOptions {
  std::string policy_path;  // empty: shortest-path fallback, no rebalancing
  int fleet = 20;
  std::vector<std::string> marginal_queues;  // queue ids to attach pmfs for
};

struct OptimizeOptions {
  CapacityMode mode = CapacityMode::Baseline;
  double epsilon = -1.0;  // < 0: use the scenario's value
  std::string mps_path;   // optional LP export
};

struct SweepOptions {
  std::string policy_path;  // empty: optimize in-process with `mode`
  CapacityMode mode = CapacityMode::Baseline;
  double epsilon = -1.0;
  int max_fleet = 100;
  int step = 1;
};

struct SimulateOptions {
  std::string policy_path;  // required
  SimConfig config;
  std::vector<std::string> traced_road_ids;
};

struct BprReportOptions {
  double epsilon = -1.0;
};

// Each command returns the list of files it wrote (for logging). All files
// land in `out_dir`, which is created if missing.
std::vector<std::string> cmd_analyze(const Scenario& scenario, const AnalyzeOptions& options,
                                     const std::string& out_dir);
std::vector<std::string> cmd_optimize(const Scenario& scenario, const OptimizeOptions& options,
                                      const std::string& out_dir);
std::vector<std::string> cmd_sweep(const Scenario& scenario, const SweepOptions& options,
                                   const std::string& out_dir);
std::vector<std::string> cmd_simulate(const Scenario& scenario, const SimulateOptions& options,
                                      const std::string& out_dir);
std::vector<std::string> cmd_bpr_report(const Scenario& scenario, const BprReportOptions& options,
                                        const std::string& out_dir);

}  // namespace amod
