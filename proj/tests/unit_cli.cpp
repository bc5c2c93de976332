#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "amod/cli.hpp"
#include "amod/perf.hpp"
#include "amod/traffic.hpp"

using namespace amod;
using doctest::Contains;

namespace {

namespace fs = std::filesystem;

std::string scenario_file(const char* name) { return std::string(AMOD_SCENARIO_DIR) + "/" + name; }

// Fresh per-test output directory under the system temp root.
std::string work_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("amod_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::vector<std::string> read_lines(const std::string& path) {
  std::string text = slurp_file(path);
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// Plain split; the writers never quote cells, and trailing empties count.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(AMOD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

}  // namespace

TEST_CASE("csv cells use twelve significant digits") {
  CHECK(csv_number(0.5) == "0.5");
  CHECK(csv_number(0.0) == "0");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333333");
  CHECK(csv_number(1234567890123.0) == "1.23456789012e+12");
  CHECK(csv_number(-2.0) == "-2");
}

TEST_CASE("analyze writes the documented schema with the shortest-path fallback") {
  Scenario sc = load_scenario(scenario_file("two_station_symmetric.json"));
  std::string dir = work_dir("analyze");
  AnalyzeOptions opt;
  opt.fleet = 6;
  opt.marginal_queues = {"rAB"};
  std::vector<std::string> files = cmd_analyze(sc, opt, dir);
  REQUIRE(files.size() == 2);

  std::vector<std::string> lines = read_lines(files[0]);
  CHECK(lines[0] ==
        "scenario,scenario_hash,mode,fleet,queue,kind,visit_rate,relative_utilization,utilization,"
        "throughput,mean_vehicles,waiting_time,availability");
  REQUIRE(lines.size() == 5);  // header + 2 stations + 2 roads
  double total_vehicles = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv(lines[i]);
    REQUIRE(f.size() == 13);
    CHECK(f[0] == sc.name);
    CHECK(f[1] == sc.hash);
    CHECK(f[2] == "shortest-path");
    CHECK(f[3] == "6");
    if (f[5] == "station") CHECK(!f[12].empty());
    if (f[5] == "road") CHECK(f[12].empty());  // availability is a station concept
    total_vehicles += std::stod(f[10]);
  }
  CHECK(total_vehicles == doctest::Approx(6.0).epsilon(1e-9));

  // the CSV availability matches a direct computation
  AmodNetwork net = AmodNetwork::build(sc.graph, sc.demands);
  NetworkSolution sol = solve_traffic_equations(net, assemble_routing_matrix(net, shortest_path_policy(net)));
  PerformanceReport rep = analyze_fleet(net, sol, 6);
  std::vector<std::string> row_a = split_csv(lines[1]);
  CHECK(row_a[4] == "A");
  CHECK(std::stod(row_a[12]) == doctest::Approx(rep.availability[0]).epsilon(1e-12));

  std::vector<std::string> marg = read_lines(files[1]);
  CHECK(marg[0] == "scenario,scenario_hash,mode,fleet,queue,count,probability");
  REQUIRE(marg.size() == 2 + 6);  // header + counts 0..6
  double mass = 0;
  for (size_t i = 1; i < marg.size(); ++i) {
    std::vector<std::string> f = split_csv(marg[i]);
    CHECK(f[4] == "rAB");
    CHECK(f[5] == std::to_string(i - 1));
    mass += std::stod(f[6]);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));

  AnalyzeOptions bad = opt;
  bad.marginal_queues = {"nope"};
  CHECK_THROWS_WITH_AS(cmd_analyze(sc, bad, dir), Contains("unknown queue 'nope'"), ValidationError);
  bad = opt;
  bad.fleet = 0;
  CHECK_THROWS_AS(cmd_analyze(sc, bad, dir), ValidationError);
}

TEST_CASE("optimize emits a policy document plus solver-consistent tables") {
  Scenario sc = load_scenario(scenario_file("two_station_asymmetric.json"));
  std::string dir = work_dir("optimize");
  OptimizeOptions opt;
  opt.mps_path = dir + "/model.mps";
  std::vector<std::string> files = cmd_optimize(sc, opt, dir);
  REQUIRE(files.size() == 4);
  CHECK(files[0] == dir + "/policy_baseline.json");

  std::vector<std::string> lines = read_lines(files[1]);
  CHECK(lines[0] ==
        "scenario,scenario_hash,mode,epsilon,objective,road,from,to,travel_time,capacity,capacity_used,"
        "flow,load,utilization,binding");
  REQUIRE(lines.size() == 3);
  std::map<std::string, std::vector<std::string>> by_road;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv(lines[i]);
    REQUIRE(f.size() == 15);
    CHECK(f[2] == "baseline");
    CHECK(std::stod(f[4]) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(f[10] == f[9]);  // baseline mode uses the nominal capacity
    by_road[f[5]] = f;
  }
  CHECK(std::stod(by_road.at("rAB")[11]) == doctest::Approx(2.0).epsilon(1e-9));  // 2 customer
  CHECK(std::stod(by_road.at("rBA")[11]) == doctest::Approx(2.0).epsilon(1e-9));  // 1 customer + 1 rebalancing
  CHECK(by_road.at("rAB")[6] == "0");
  CHECK(by_road.at("rAB")[7] == "1");
  CHECK(by_road.at("rAB")[14] == "0");  // capacity 10 is slack at load 2

  std::vector<std::string> reb = read_lines(files[2]);
  CHECK(reb[0] == "scenario,scenario_hash,mode,origin,destination,rate");
  REQUIRE(reb.size() == 3);  // both rebalancing classes, zeros included
  std::map<std::string, double> reb_rate;
  for (size_t i = 1; i < reb.size(); ++i) {
    std::vector<std::string> f = split_csv(reb[i]);
    reb_rate[f[3] + ">" + f[4]] = std::stod(f[5]);
  }
  CHECK(reb_rate.at("A>B") == doctest::Approx(0.0));
  CHECK(reb_rate.at("B>A") == doctest::Approx(1.0).epsilon(1e-9));

  std::string mps = slurp_file(dir + "/model.mps");
  for (const char* section : {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"})
    CHECK_MESSAGE(mps.find(section) != std::string::npos, "MPS is missing " << section);

  OptimizeOptions cons;
  cons.mode = CapacityMode::Conservative;
  std::vector<std::string> cons_files = cmd_optimize(sc, cons, dir);
  CHECK(cons_files[0] == dir + "/policy_conservative.json");
  std::vector<std::string> cons_lines = read_lines(cons_files[1]);
  std::vector<std::string> f = split_csv(cons_lines[1]);
  CHECK(std::stod(f[10]) < std::stod(f[9]));  // conservative capacity sits below nominal
}

TEST_CASE("sweep emits tidy per-fleet rows that conserve vehicles") {
  Scenario sc = load_scenario(scenario_file("two_station_symmetric.json"));
  std::string dir = work_dir("sweep");
  SweepOptions opt;
  opt.max_fleet = 4;
  std::vector<std::string> files = cmd_sweep(sc, opt, dir);
  REQUIRE(files.size() == 1);

  std::vector<std::string> lines = read_lines(files[0]);
  CHECK(lines[0] == "scenario,scenario_hash,mode,m,metric,queue,value");
  REQUIRE(lines.size() == 1 + 4 * 8);  // per m: 2 availability + 3 vehicle + 2 top-road + 1 g-ratio

  std::map<int, std::map<std::string, double>> totals;       // m -> metric -> value (queue-less metrics)
  std::map<int, std::map<std::string, double>> availability;  // m -> station -> value
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv(lines[i]);
    REQUIRE(f.size() == 7);
    CHECK(f[2] == "baseline");
    int m = std::stoi(f[3]);
    if (f[4] == "availability")
      availability[m][f[5]] = std::stod(f[6]);
    else
      totals[m][f[4]] = std::stod(f[6]);
  }
  double prev = 0;
  for (int m = 1; m <= 4; ++m) {
    CHECK(availability[m].at("A") == doctest::Approx(availability[m].at("B")).epsilon(1e-12));
    CHECK(availability[m].at("A") > prev);  // availability grows with the fleet
    prev = availability[m].at("A");
    double vehicles = totals[m].at("vehicles_stations") + totals[m].at("vehicles_roads_customer") +
                      totals[m].at("vehicles_roads_rebalancing");
    CHECK(vehicles == doctest::Approx(m).epsilon(1e-9));
    CHECK(totals[m].at("vehicles_roads_rebalancing") == doctest::Approx(0.0));  // symmetric demand needs none
    CHECK(totals[m].at("top_road_std") > 0);
    CHECK(totals[m].at("g_ratio") > 0);
    CHECK(totals[m].at("g_ratio") < 1);
  }

  SweepOptions stepped = opt;
  stepped.max_fleet = 5;
  stepped.step = 2;
  std::vector<std::string> stepped_lines = read_lines(cmd_sweep(sc, stepped, work_dir("sweep_step"))[0]);
  std::set<std::string> ms;
  for (size_t i = 1; i < stepped_lines.size(); ++i) ms.insert(split_csv(stepped_lines[i])[3]);
  CHECK(ms == std::set<std::string>{"1", "3", "5"});

  SweepOptions bad = opt;
  bad.step = 0;
  CHECK_THROWS_AS(cmd_sweep(sc, bad, dir), ValidationError);
  bad = opt;
  bad.max_fleet = 0;
  CHECK_THROWS_AS(cmd_sweep(sc, bad, dir), ValidationError);
}

TEST_CASE("simulate scores simulation cells against exact predictions") {
  Scenario sc = load_scenario(scenario_file("two_station_symmetric.json"));
  std::string dir = work_dir("simulate");
  cmd_optimize(sc, OptimizeOptions{}, dir);

  SimulateOptions opt;
  CHECK_THROWS_WITH_AS(cmd_simulate(sc, opt, dir), Contains("needs --policy"), ValidationError);

  opt.policy_path = dir + "/policy_baseline.json";
  opt.config.fleet = 6;
  opt.config.horizon = 20000;
  opt.config.seed = 11;
  opt.config.sample_interval = 50;
  opt.traced_road_ids = {"rAB"};
  std::vector<std::string> files = cmd_simulate(sc, opt, dir);
  REQUIRE(files.size() == 4);

  std::vector<std::string> stations = read_lines(files[0]);
  CHECK(stations[0] ==
        "scenario,scenario_hash,mode,fleet,seed,family,station,arrivals,served,availability,"
        "availability_half_width,predicted_availability,inside_ci");
  REQUIRE(stations.size() == 3);
  for (size_t i = 1; i < stations.size(); ++i) {
    std::vector<std::string> f = split_csv(stations[i]);
    CHECK(f[2] == "baseline");
    CHECK(f[5] == "exponential");
    CHECK(std::stoll(f[8]) <= std::stoll(f[7]));  // served <= arrivals
    CHECK((f[12] == "0" || f[12] == "1"));
  }

  std::vector<std::string> queues = read_lines(files[1]);
  REQUIRE(queues.size() == 5);
  std::vector<std::string> summary = read_lines(files[2]);
  REQUIRE(summary.size() == 2);
  std::vector<std::string> s = split_csv(summary[1]);
  REQUIRE(s.size() == 17);
  CHECK(s[15] == "4");  // 2 station-availability cells + 2 road-occupancy cells
  CHECK(std::stoll(s[16]) <= 4);
  CHECK(std::stod(s[7]) == doctest::Approx(2000.0));  // default warmup = horizon / 10

  std::vector<std::string> trace = read_lines(files[3]);
  CHECK(trace[0] == "scenario_hash,mode,time,queueId,occupancy");
  REQUIRE(trace.size() > 100);
  for (size_t i = 1; i < trace.size(); ++i) {
    std::vector<std::string> f = split_csv(trace[i]);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == sc.hash);
    CHECK(f[3] == "rAB");
    CHECK(std::stoi(f[4]) >= 0);
    CHECK(std::stoi(f[4]) <= 6);
  }

  SimulateOptions bad = opt;
  bad.traced_road_ids = {"rXY"};
  CHECK_THROWS_WITH_AS(cmd_simulate(sc, bad, dir), Contains("unknown queue"), ValidationError);
  bad.traced_road_ids = {"A"};
  CHECK_THROWS_WITH_AS(cmd_simulate(sc, bad, dir), Contains("must name a road"), ValidationError);
}

TEST_CASE("bpr report covers both capacity modes in one table") {
  Scenario sc = load_scenario(scenario_file("two_station_asymmetric.json"));
  std::string dir = work_dir("bpr");
  std::vector<std::string> files = cmd_bpr_report(sc, BprReportOptions{}, dir);
  REQUIRE(files.size() == 1);

  std::vector<std::string> lines = read_lines(files[0]);
  CHECK(lines[0] ==
        "scenario,scenario_hash,mode,epsilon,kind,origin,destination,rate,nominal_time,expected_time,"
        "deviation");
  REQUIRE(lines.size() == 7);  // 2 modes x (2 customer classes + 1 active rebalancing class)
  int baseline_rows = 0, conservative_rows = 0, rebalancing_rows = 0;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<std::string> f = split_csv(lines[i]);
    REQUIRE(f.size() == 11);
    (f[2] == "baseline" ? baseline_rows : conservative_rows) += 1;
    if (f[4] == "rebalancing") {
      ++rebalancing_rows;
      CHECK(f[5] == "B");
      CHECK(f[6] == "A");
    }
    CHECK(std::stod(f[3]) == doctest::Approx(sc.epsilon));
    CHECK(std::stod(f[9]) >= std::stod(f[8]));  // congestion only adds time
    CHECK(std::stod(f[10]) >= 0.0);
  }
  CHECK(baseline_rows == 3);
  CHECK(conservative_rows == 3);
  CHECK(rebalancing_rows == 2);

  BprReportOptions bad;
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(cmd_bpr_report(sc, bad, dir), ValidationError);
}

TEST_CASE("the binary maps outcomes onto the documented exit codes") {
  std::string sym = scenario_file("two_station_symmetric.json");
  std::string dir = work_dir("exitcodes");

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("analyze --help") == 0);
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 2);                                    // a subcommand is required
  CHECK(run_cli("analyze --scenario " + sym + " --bogus") == 2);
  CHECK(run_cli("analyze") == 2);                             // --scenario is required
  CHECK(run_cli("analyze --scenario /nonexistent.json --out-dir " + dir) == 2);
  CHECK(run_cli("simulate --scenario " + sym + " --out-dir " + dir) == 2);  // --policy is required

  CHECK(run_cli("analyze --scenario " + sym + " --fleet 4 --out-dir " + dir) == 0);
  CHECK(fs::exists(dir + "/analyze.csv"));

  // an over-subscribed network surfaces infeasibility as exit 3
  std::string squeezed = dir + "/squeezed.json";
  {
    std::ofstream out(squeezed);
    out << R"({"version":1,"name":"squeezed","vertices":[0,1],
      "stations":[{"id":"A","vertex":0},{"id":"B","vertex":1}],
      "roads":[{"id":"rAB","from":0,"to":1,"travel_time":2.0,"capacity":0.2},
               {"id":"rBA","from":1,"to":0,"travel_time":2.0,"capacity":0.2}],
      "demands":[{"origin":"A","destination":"B","rate":1.0},
                 {"origin":"B","destination":"A","rate":1.0}]})";
  }
  CHECK(run_cli("optimize --scenario " + squeezed + " --out-dir " + dir) == 3);
}

TEST_CASE("repeated invocations produce byte-identical artifacts") {
  std::string sym = scenario_file("two_station_symmetric.json");
  std::string a = work_dir("rerun_a"), b = work_dir("rerun_b");

  REQUIRE(run_cli("optimize --scenario " + sym + " --out-dir " + a) == 0);
  REQUIRE(run_cli("optimize --scenario " + sym + " --out-dir " + b) == 0);
  for (const char* name : {"/policy_baseline.json", "/optimize_summary.csv", "/rebalancing.csv"})
    CHECK(slurp_file(a + name) == slurp_file(b + name));

  auto sim_cmd = [&](const std::string& dir) {
    return "simulate --scenario " + sym + " --policy " + dir + "/policy_baseline.json" +
           " --fleet 5 --horizon 5000 --seed 3 --trace rAB --sample-interval 25 --out-dir " + dir;
  };
  REQUIRE(run_cli(sim_cmd(a)) == 0);
  REQUIRE(run_cli(sim_cmd(b)) == 0);
  for (const char* name : {"/sim_stations.csv", "/sim_queues.csv", "/sim_summary.csv", "/trace.csv"})
    CHECK(slurp_file(a + name) == slurp_file(b + name));

  REQUIRE(run_cli("analyze --scenario " + sym + " --fleet 7 --out-dir " + a) == 0);
  REQUIRE(run_cli("analyze --scenario " + sym + " --fleet 7 --out-dir " + b) == 0);
  CHECK(slurp_file(a + "/analyze.csv") == slurp_file(b + "/analyze.csv"));
}
