#include "amod/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amod/lp.hpp"
#include "amod/optimizer.hpp"
#include "amod/perf.hpp"
#include "amod/traffic.hpp"

namespace amod {

namespace {

namespace fs = std::filesystem;

std::ofstream open_csv(const std::string& out_dir, const std::string& name, std::string& path_out) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  fs::path p = fs::path(out_dir) / name;
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write output file '" + p.string() + "'");
  path_out = p.string();
  return out;
}

std::string family_name(TravelTimeFamily family) {
  switch (family) {
    case TravelTimeFamily::Exponential: return "exponential";
    case TravelTimeFamily::Deterministic: return "deterministic";
    case TravelTimeFamily::Lognormal: return "lognormal";
  }
  return "exponential";
}

double resolve_epsilon(const Scenario& scenario, double override_value) {
  double eps = override_value < 0 ? scenario.epsilon : override_value;
  if (!(eps > 0 && eps < 1)) throw ValidationError("epsilon must lie in (0, 1)");
  return eps;
}

// Rate of a class: customer classes carry it on the network, rebalancing
// classes on the flow solution (in rebalancing-class order).
double class_rate(const AmodNetwork& net, const FlowSolution& flow, int cls) {
  const TripClass& c = net.classes()[cls];
  if (c.kind == TripKind::Customer) return c.rate;
  int ordinal = 0;
  for (int k = 0; k < cls; ++k)
    if (net.classes()[k].kind == TripKind::Rebalancing) ++ordinal;
  return flow.rebalancing_rates.at(ordinal);
}

}  // namespace

std::string csv_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::vector<std::string> cmd_analyze(const Scenario& scenario, const AnalyzeOptions& options,
                                     const std::string& out_dir) {
  if (options.fleet < 1) throw ValidationError("analyze needs --fleet >= 1");
  AmodNetwork net = AmodNetwork::build(scenario.graph, scenario.demands);
  RoutingPolicy policy;
  std::string mode_label = "shortest-path";
  if (!options.policy_path.empty()) {
    PolicyDocument doc = load_policy(options.policy_path, net, scenario.hash);
    net = net.with_rebalancing_rates(doc.rebalancing_rates);
    policy = doc.policy;
    mode_label = to_string(doc.mode);
  } else {
    policy = shortest_path_policy(net);
  }
  std::vector<int> marginal_queues;
  for (const auto& id : options.marginal_queues) {
    int q = net.queue_index(id);
    if (q < 0) throw ValidationError("--marginal references unknown queue '" + id + "'");
    marginal_queues.push_back(q);
  }

  RoutingMatrix matrix = assemble_routing_matrix(net, policy);
  NetworkSolution solution = solve_traffic_equations(net, matrix);
  UtilizationProfile profile = utilization_profile(net, solution);
  PerformanceReport report = analyze_fleet(net, solution, options.fleet, marginal_queues);

  std::vector<std::string> written;
  std::string path;
  std::ofstream out = open_csv(out_dir, "analyze.csv", path);
  out << "scenario,scenario_hash,mode,fleet,queue,kind,visit_rate,relative_utilization,utilization,"
         "throughput,mean_vehicles,waiting_time,availability\n";
  for (int i = 0; i < net.num_queues(); ++i) {
    bool is_station = net.queue(i).kind == QueueKind::Station;
    out << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << options.fleet << ','
        << net.queue(i).id << ',' << (is_station ? "station" : "road") << ','
        << csv_number(solution.queue_throughput[i]) << ',' << csv_number(solution.relative_utilization[i]) << ','
        << csv_number(profile.rho[i]) << ',' << csv_number(report.throughput[i]) << ','
        << csv_number(report.mean_count[i]) << ',' << csv_number(report.waiting_time[i]) << ','
        << (is_station ? csv_number(report.availability[i]) : std::string()) << '\n';
  }
  out.close();
  written.push_back(path);

  if (!marginal_queues.empty()) {
    std::ofstream marg = open_csv(out_dir, "marginals.csv", path);
    marg << "scenario,scenario_hash,mode,fleet,queue,count,probability\n";
    for (int q : marginal_queues) {
      const std::vector<double>& pmf = report.marginals.at(q);
      for (size_t x = 0; x < pmf.size(); ++x)
        marg << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << options.fleet << ','
             << net.queue(q).id << ',' << x << ',' << csv_number(pmf[x]) << '\n';
    }
    marg.close();
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> cmd_optimize(const Scenario& scenario, const OptimizeOptions& options,
                                      const std::string& out_dir) {
  AmodNetwork net = AmodNetwork::build(scenario.graph, scenario.demands);
  double epsilon = resolve_epsilon(scenario, options.epsilon);
  FlowSolution flow = solve_a_oscarr(net, options.mode, epsilon);
  RoutingPolicy policy = decompose_to_policy(net, flow);
  std::string mode_label = to_string(options.mode);

  PolicyDocument doc;
  doc.scenario_hash = scenario.hash;
  doc.mode = options.mode;
  doc.epsilon = epsilon;
  doc.objective = flow.objective;
  doc.rebalancing_rates = flow.rebalancing_rates;
  doc.policy = policy;

  std::vector<std::string> written;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::string policy_path = (fs::path(out_dir) / ("policy_" + mode_label + ".json")).string();
  save_policy(policy_path, net, doc);
  written.push_back(policy_path);

  std::string path;
  std::ofstream out = open_csv(out_dir, "optimize_summary.csv", path);
  out << "scenario,scenario_hash,mode,epsilon,objective,road,from,to,travel_time,capacity,capacity_used,"
         "flow,load,utilization,binding\n";
  for (int r = 0; r < net.num_roads(); ++r) {
    const Queue& q = net.queue(net.num_stations() + r);
    bool binding = std::find(flow.binding_capacity_rows.begin(), flow.binding_capacity_rows.end(),
                             "cap[" + q.id + "]") != flow.binding_capacity_rows.end();
    out << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << csv_number(epsilon) << ','
        << csv_number(flow.objective) << ',' << q.id << ',' << net.vertex_ids()[q.parent] << ','
        << net.vertex_ids()[q.child] << ','
        << csv_number(q.travel_time) << ',' << csv_number(q.capacity) << ','
        << csv_number(flow.capacity_rhs[r]) << ',' << csv_number(flow.road_flow[r]) << ','
        << csv_number(flow.road_load[r]) << ',' << csv_number(flow.road_load[r] / flow.capacity_rhs[r]) << ','
        << (binding ? 1 : 0) << '\n';
  }
  out.close();
  written.push_back(path);

  std::ofstream reb = open_csv(out_dir, "rebalancing.csv", path);
  reb << "scenario,scenario_hash,mode,origin,destination,rate\n";
  int ordinal = 0;
  for (int k = 0; k < net.num_classes(); ++k) {
    const TripClass& c = net.classes()[k];
    if (c.kind != TripKind::Rebalancing) continue;
    reb << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << net.queue(c.origin).id << ','
        << net.queue(c.destination).id << ',' << csv_number(flow.rebalancing_rates.at(ordinal++)) << '\n';
  }
  reb.close();
  written.push_back(path);

  if (!options.mps_path.empty()) {
    LpModel model = build_lp(net, options.mode, epsilon);
    std::ofstream mps(options.mps_path);
    if (!mps) throw ValidationError("cannot write MPS file '" + options.mps_path + "'");
    mps << lp_to_mps(model.lp, scenario.name + "_" + mode_label);
    written.push_back(options.mps_path);
  }
  return written;
}

std::vector<std::string> cmd_sweep(const Scenario& scenario, const SweepOptions& options,
                                   const std::string& out_dir) {
  if (options.max_fleet < 1) throw ValidationError("sweep needs --m-max >= 1");
  if (options.step < 1) throw ValidationError("sweep needs --m-step >= 1");
  AmodNetwork net = AmodNetwork::build(scenario.graph, scenario.demands);
  RoutingPolicy policy;
  std::vector<double> rates;
  std::string mode_label;
  if (!options.policy_path.empty()) {
    PolicyDocument doc = load_policy(options.policy_path, net, scenario.hash);
    policy = doc.policy;
    rates = doc.rebalancing_rates;
    mode_label = to_string(doc.mode);
  } else {
    double epsilon = resolve_epsilon(scenario, options.epsilon);
    FlowSolution flow = solve_a_oscarr(net, options.mode, epsilon);
    policy = decompose_to_policy(net, flow);
    rates = flow.rebalancing_rates;
    mode_label = to_string(options.mode);
  }
  net = net.with_rebalancing_rates(rates);
  RoutingMatrix matrix = assemble_routing_matrix(net, policy);
  NetworkSolution solution = solve_traffic_equations(net, matrix);
  UtilizationProfile profile = utilization_profile(net, solution);

  int top_road = net.num_stations();
  for (int i = net.num_stations(); i < net.num_queues(); ++i)
    if (profile.rho[i] > profile.rho[top_road]) top_road = i;

  std::string path;
  std::ofstream out = open_csv(out_dir, "sweep.csv", path);
  out << "scenario,scenario_hash,mode,m,metric,queue,value\n";
  auto row = [&](int m, const std::string& metric, const std::string& queue, double value) {
    out << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << m << ',' << metric << ',' << queue
        << ',' << csv_number(value) << '\n';
  };
  int nq = net.num_queues(), nk = net.num_classes(), ns = net.num_stations();
  for (int m = 1; m <= options.max_fleet; m += options.step) {
    PerformanceReport report = analyze_fleet(net, solution, m, {top_road});
    for (int s = 0; s < ns; ++s) row(m, "availability", net.queue(s).id, report.availability[s]);
    double stations = 0, customer = 0, rebalancing = 0;
    for (int s = 0; s < ns; ++s) stations += report.mean_count[s];
    for (int i = ns; i < nq; ++i)
      for (int k = 0; k < nk; ++k) {
        double v = report.class_mean[static_cast<size_t>(i) * nk + k];
        (net.classes()[k].kind == TripKind::Customer ? customer : rebalancing) += v;
      }
    row(m, "vehicles_stations", "", stations);
    row(m, "vehicles_roads_customer", "", customer);
    row(m, "vehicles_roads_rebalancing", "", rebalancing);
    const std::vector<double>& pmf = report.marginals.at(top_road);
    double mean = report.mean_count[top_road], second = 0;
    for (size_t x = 0; x < pmf.size(); ++x) second += static_cast<double>(x) * static_cast<double>(x) * pmf[x];
    row(m, "top_road_mean", net.queue(top_road).id, mean);
    row(m, "top_road_std", net.queue(top_road).id, std::sqrt(std::max(0.0, second - mean * mean)));
    row(m, "g_ratio", "", report.g_ratio);
  }
  out.close();
  return {path};
}

std::vector<std::string> cmd_simulate(const Scenario& scenario, const SimulateOptions& options,
                                      const std::string& out_dir) {
  if (options.policy_path.empty()) throw ValidationError("simulate needs --policy (run optimize first)");
  AmodNetwork net = AmodNetwork::build(scenario.graph, scenario.demands);
  PolicyDocument doc = load_policy(options.policy_path, net, scenario.hash);
  net = net.with_rebalancing_rates(doc.rebalancing_rates);
  std::string mode_label = to_string(doc.mode);

  SimConfig config = options.config;
  if (config.fleet < 1) throw ValidationError("simulate needs --fleet >= 1");
  for (const auto& id : options.traced_road_ids) {
    int q = net.queue_index(id);
    if (q < 0) throw ValidationError("--trace references unknown queue '" + id + "'");
    if (q < net.num_stations()) throw ValidationError("--trace must name a road, got station '" + id + "'");
    config.traced_roads.push_back(q);
  }
  SimReport rep = simulate(net, doc.policy, config);

  RoutingMatrix matrix = assemble_routing_matrix(net, doc.policy);
  NetworkSolution solution = solve_traffic_equations(net, matrix);
  PerformanceReport predicted = analyze_fleet(net, solution, config.fleet);

  int ns = net.num_stations(), nq = net.num_queues();
  long long cells_total = 0, cells_inside = 0;
  std::vector<std::string> written;
  std::string path;

  std::ofstream st = open_csv(out_dir, "sim_stations.csv", path);
  st << "scenario,scenario_hash,mode,fleet,seed,family,station,arrivals,served,availability,"
        "availability_half_width,predicted_availability,inside_ci\n";
  for (int s = 0; s < ns; ++s) {
    bool inside = std::fabs(rep.availability[s].mean - predicted.availability[s]) <= rep.availability[s].half_width;
    ++cells_total;
    cells_inside += inside ? 1 : 0;
    st << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << config.fleet << ',' << config.seed
       << ',' << family_name(config.family) << ',' << net.queue(s).id << ',' << rep.arrivals[s] << ','
       << rep.served[s] << ',' << csv_number(rep.availability[s].mean) << ','
       << csv_number(rep.availability[s].half_width) << ',' << csv_number(predicted.availability[s]) << ','
       << (inside ? 1 : 0) << '\n';
  }
  st.close();
  written.push_back(path);

  std::ofstream qs = open_csv(out_dir, "sim_queues.csv", path);
  qs << "scenario,scenario_hash,mode,fleet,seed,family,queue,kind,occupancy,occupancy_half_width,"
        "occupancy_variance,predicted_occupancy,inside_ci\n";
  for (int i = 0; i < nq; ++i) {
    bool is_station = i < ns;
    bool inside = std::fabs(rep.occupancy[i].mean - predicted.mean_count[i]) <= rep.occupancy[i].half_width;
    if (!is_station) {  // road-occupancy cells count toward the CI score
      ++cells_total;
      cells_inside += inside ? 1 : 0;
    }
    qs << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << config.fleet << ',' << config.seed
       << ',' << family_name(config.family) << ',' << net.queue(i).id << ',' << (is_station ? "station" : "road")
       << ',' << csv_number(rep.occupancy[i].mean) << ',' << csv_number(rep.occupancy[i].half_width) << ','
       << csv_number(rep.occupancy_variance[i]) << ',' << csv_number(predicted.mean_count[i]) << ','
       << (inside ? 1 : 0) << '\n';
  }
  qs.close();
  written.push_back(path);

  double predicted_road = 0;
  for (int i = ns; i < nq; ++i) predicted_road += predicted.mean_count[i];
  std::ofstream sm = open_csv(out_dir, "sim_summary.csv", path);
  sm << "scenario,scenario_hash,mode,fleet,seed,family,horizon,warmup,customer_trips,rebalancing_trips,"
        "rebalancing_trip_share,rebalancing_travel_share,road_occupancy,road_occupancy_half_width,"
        "predicted_road_occupancy,cells_total,cells_inside\n";
  sm << scenario.name << ',' << scenario.hash << ',' << mode_label << ',' << config.fleet << ',' << config.seed
     << ',' << family_name(config.family) << ',' << csv_number(rep.horizon) << ',' << csv_number(rep.warmup) << ','
     << rep.customer_trips << ',' << rep.rebalancing_trips << ',' << csv_number(rep.rebalancing_trip_share) << ','
     << csv_number(rep.rebalancing_travel_share) << ',' << csv_number(rep.total_road_occupancy.mean) << ','
     << csv_number(rep.total_road_occupancy.half_width) << ',' << csv_number(predicted_road) << ',' << cells_total
     << ',' << cells_inside << '\n';
  sm.close();
  written.push_back(path);

  if (!rep.trace_times.empty()) {
    std::ofstream tr = open_csv(out_dir, "trace.csv", path);
    tr << "scenario_hash,mode,time,queueId,occupancy\n";
    for (size_t ti = 0; ti < rep.trace_times.size(); ++ti)
      for (size_t ri = 0; ri < rep.traced_roads.size(); ++ri)
        tr << scenario.hash << ',' << mode_label << ',' << csv_number(rep.trace_times[ti]) << ','
           << net.queue(rep.traced_roads[ri]).id << ',' << rep.trace_counts[ri][ti] << '\n';
    tr.close();
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> cmd_bpr_report(const Scenario& scenario, const BprReportOptions& options,
                                        const std::string& out_dir) {
  AmodNetwork net = AmodNetwork::build(scenario.graph, scenario.demands);
  double epsilon = resolve_epsilon(scenario, options.epsilon);

  std::string path;
  std::ofstream out = open_csv(out_dir, "bpr_report.csv", path);
  out << "scenario,scenario_hash,mode,epsilon,kind,origin,destination,rate,nominal_time,expected_time,"
         "deviation\n";
  for (CapacityMode mode : {CapacityMode::Baseline, CapacityMode::Conservative}) {
    FlowSolution flow = solve_a_oscarr(net, mode, epsilon);
    std::vector<OdDeviation> deviations =
        expected_bpr_deviation(net, flow.flows, flow.road_load, scenario.bpr.delta, scenario.bpr.beta);
    for (const OdDeviation& d : deviations) {
      const TripClass& c = net.classes()[d.cls];
      out << scenario.name << ',' << scenario.hash << ',' << to_string(mode) << ',' << csv_number(epsilon) << ','
          << (c.kind == TripKind::Customer ? "customer" : "rebalancing") << ',' << net.queue(c.origin).id << ','
          << net.queue(c.destination).id << ',' << csv_number(class_rate(net, flow, d.cls)) << ','
          << csv_number(d.nominal_time) << ',' << csv_number(d.expected_time) << ',' << csv_number(d.deviation)
          << '\n';
    }
  }
  out.close();
  return {path};
}

}  // namespace amod
