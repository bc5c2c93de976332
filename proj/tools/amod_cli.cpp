// amod: analyze, optimize, sweep, simulate, and bpr-report workflows over
// scenario documents. Exit codes: 0 success, 2 validation error, 3 infeasible
// optimization, 4 runtime/numerical error.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amod/cli.hpp"
#include "amod/common.hpp"
#include "amod/scenario.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

std::string default_out_dir() {
  const char* env = std::getenv("AMOD_OUT_DIR");
  return env && *env ? env : ".";
}

void add_schema_footer(CLI::App* cmd, const std::string& text) {
  cmd->footer("Output files and columns:\n" + text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Queuing-network analysis and control synthesis for autonomous mobility-on-demand fleets"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = default_out_dir();
  app.add_option("--scenario", scenario_path, "Scenario JSON document")->required()->envname("AMOD_SCENARIO");
  app.add_option("--out-dir", out_dir, "Output directory (default: $AMOD_OUT_DIR or .)");

  auto mode_option = [](CLI::App* cmd, amod::CapacityMode& mode) {
    cmd->add_option_function<std::string>(
           "--mode",
           [&mode](const std::string& v) {
             if (v == "baseline")
               mode = amod::CapacityMode::Baseline;
             else if (v == "conservative")
               mode = amod::CapacityMode::Conservative;
             else
               throw CLI::ValidationError("--mode", "must be 'baseline' or 'conservative'");
           },
           "Capacity mode: baseline | conservative (default baseline)");
  };

  amod::AnalyzeOptions analyze_opt;
  CLI::App* analyze = app.add_subcommand("analyze", "Traffic equations + exact fleet metrics for a policy");
  analyze->add_option("--policy", analyze_opt.policy_path, "Optimized policy JSON (default: shortest-path routing)");
  analyze->add_option("--fleet", analyze_opt.fleet, "Fleet size m (default 20)");
  analyze->add_option("--marginal", analyze_opt.marginal_queues, "Queue id whose occupancy pmf to emit (repeatable)");
  add_schema_footer(analyze,
                    "  analyze.csv: scenario,scenario_hash,mode,fleet,queue,kind,visit_rate,"
                    "relative_utilization,utilization,throughput,mean_vehicles,waiting_time,availability\n"
                    "  marginals.csv: scenario,scenario_hash,mode,fleet,queue,count,probability");

  amod::OptimizeOptions optimize_opt;
  CLI::App* optimize = app.add_subcommand("optimize", "Solve the routing/rebalancing LP and export the policy");
  mode_option(optimize, optimize_opt.mode);
  optimize->add_option("--epsilon", optimize_opt.epsilon, "Capacity exceedance budget (default: scenario value)");
  optimize->add_option("--mps", optimize_opt.mps_path, "Also export the LP in MPS format to this path");
  add_schema_footer(optimize,
                    "  policy_<mode>.json: reusable routing + rebalancing policy document\n"
                    "  optimize_summary.csv: scenario,scenario_hash,mode,epsilon,objective,road,from,to,"
                    "travel_time,capacity,capacity_used,flow,load,utilization,binding\n"
                    "  rebalancing.csv: scenario,scenario_hash,mode,origin,destination,rate");

  amod::SweepOptions sweep_opt;
  CLI::App* sweep = app.add_subcommand("sweep", "Exact metrics as a function of fleet size under a policy");
  sweep->add_option("--policy", sweep_opt.policy_path, "Policy JSON (default: optimize in-process)");
  mode_option(sweep, sweep_opt.mode);
  sweep->add_option("--epsilon", sweep_opt.epsilon, "Exceedance budget for in-process optimization");
  sweep->add_option("--m-max", sweep_opt.max_fleet, "Largest fleet size (default 100)");
  sweep->add_option("--m-step", sweep_opt.step, "Fleet size step (default 1)");
  add_schema_footer(sweep,
                    "  sweep.csv: scenario,scenario_hash,mode,m,metric,queue,value\n"
                    "    metrics: availability (per station), vehicles_stations, vehicles_roads_customer,\n"
                    "    vehicles_roads_rebalancing, top_road_mean, top_road_std, g_ratio");

  amod::SimulateOptions sim_opt;
  double warmup = -1.0;
  std::string family = "exponential";
  CLI::App* simulate = app.add_subcommand("simulate", "Discrete-event validation of a policy");
  simulate->add_option("--policy", sim_opt.policy_path, "Optimized policy JSON")->required();
  simulate->add_option("--fleet", sim_opt.config.fleet, "Fleet size m (default 1)");
  simulate->add_option("--horizon", sim_opt.config.horizon, "Simulated time span (default 10000)");
  simulate->add_option("--warmup", warmup, "Statistics start time (default: horizon / 10)");
  simulate->add_option("--batches", sim_opt.config.batches, "Batch count for confidence intervals (default 20)");
  simulate->add_option("--seed", sim_opt.config.seed, "Random seed (default 1)");
  simulate->add_option_function<std::string>(
      "--family",
      [&family](const std::string& v) {
        if (v != "exponential" && v != "deterministic" && v != "lognormal")
          throw CLI::ValidationError("--family", "must be exponential | deterministic | lognormal");
        family = v;
      },
      "Road travel-time family (default exponential)");
  simulate->add_option("--sigma", sim_opt.config.lognormal_sigma, "Lognormal shape parameter (default 0.5)");
  simulate->add_option("--trace", sim_opt.traced_road_ids, "Road id to trace (repeatable)");
  simulate->add_option("--sample-interval", sim_opt.config.sample_interval, "Trace sampling spacing");
  add_schema_footer(simulate,
                    "  sim_stations.csv: scenario,scenario_hash,mode,fleet,seed,family,station,arrivals,served,"
                    "availability,availability_half_width,predicted_availability,inside_ci\n"
                    "  sim_queues.csv: scenario,scenario_hash,mode,fleet,seed,family,queue,kind,occupancy,"
                    "occupancy_half_width,occupancy_variance,predicted_occupancy,inside_ci\n"
                    "  sim_summary.csv: scenario,scenario_hash,mode,fleet,seed,family,horizon,warmup,"
                    "customer_trips,rebalancing_trips,rebalancing_trip_share,rebalancing_travel_share,"
                    "road_occupancy,road_occupancy_half_width,predicted_road_occupancy,cells_total,cells_inside\n"
                    "  trace.csv: scenario_hash,mode,time,queueId,occupancy");

  amod::BprReportOptions bpr_opt;
  CLI::App* bpr = app.add_subcommand("bpr-report", "Congestion-aware travel-time deviations per demand pair");
  bpr->add_option("--epsilon", bpr_opt.epsilon, "Exceedance budget for the conservative rows");
  add_schema_footer(bpr,
                    "  bpr_report.csv: scenario,scenario_hash,mode,epsilon,kind,origin,destination,rate,"
                    "nominal_time,expected_time,deviation");

  // global flags (--scenario, --out-dir) may appear after the subcommand
  for (CLI::App* sub : {analyze, optimize, sweep, simulate, bpr}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return amod::kExitValidation;
  }

  try {
    amod::Scenario scenario = amod::load_scenario(scenario_path);
    if (warmup >= 0) sim_opt.config.warmup = warmup;
    if (family == "deterministic") sim_opt.config.family = amod::TravelTimeFamily::Deterministic;
    if (family == "lognormal") sim_opt.config.family = amod::TravelTimeFamily::Lognormal;

    std::vector<std::string> written;
    if (*analyze) written = amod::cmd_analyze(scenario, analyze_opt, out_dir);
    if (*optimize) written = amod::cmd_optimize(scenario, optimize_opt, out_dir);
    if (*sweep) written = amod::cmd_sweep(scenario, sweep_opt, out_dir);
    if (*simulate) written = amod::cmd_simulate(scenario, sim_opt, out_dir);
    if (*bpr) written = amod::cmd_bpr_report(scenario, bpr_opt, out_dir);
    for (const std::string& f : written) std::cout << "wrote " << f << '\n';
    return amod::kExitOk;
  } catch (const amod::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const std::string& row : e.binding_rows()) std::cerr << "  binding: " << row << '\n';
    return e.exit_code();
  } catch (const amod::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return amod::kExitRuntime;
  }
}
