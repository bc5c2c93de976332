#include <cmath>

#include <doctest.h>

#include "amod/optimizer.hpp"
#include "amod/perf.hpp"
#include "amod/scenario.hpp"
#include "amod/simulator.hpp"
#include "amod/traffic.hpp"

using namespace amod;

namespace {

std::string scenario_file(const char* name) { return std::string(AMOD_SCENARIO_DIR) + "/" + name; }

struct Bundle {
  AmodNetwork net;
  RoutingPolicy policy;
  NetworkSolution solution;
};

Bundle optimized_bundle(const char* name) {
  Scenario sc = load_scenario(scenario_file(name));
  AmodNetwork net = AmodNetwork::build(sc.graph, sc.demands);
  FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  RoutingPolicy policy = decompose_to_policy(net, flow);
  AmodNetwork routed = net.with_rebalancing_rates(flow.rebalancing_rates);
  NetworkSolution sol = solve_traffic_equations(routed, assemble_routing_matrix(routed, policy));
  return {routed, policy, std::move(sol)};
}

}  // namespace

TEST_CASE("simulation is deterministic in (seed, config, scenario) and accounts every demand") {
  Bundle b = optimized_bundle("two_station_symmetric.json");
  SimConfig cfg;
  cfg.fleet = 8;
  cfg.horizon = 20000;
  cfg.seed = 7;
  SimReport one = simulate(b.net, b.policy, cfg);
  SimReport two = simulate(b.net, b.policy, cfg);

  CHECK(one.arrivals == two.arrivals);
  CHECK(one.served == two.served);
  CHECK(one.customer_trips == two.customer_trips);
  for (size_t s = 0; s < one.availability.size(); ++s) {
    CHECK(one.availability[s].mean == two.availability[s].mean);
    CHECK(one.availability[s].half_width == two.availability[s].half_width);
  }
  for (size_t i = 0; i < one.occupancy.size(); ++i) CHECK(one.occupancy[i].mean == two.occupancy[i].mean);

  SimConfig other = cfg;
  other.seed = 8;
  SimReport three = simulate(b.net, b.policy, other);
  CHECK(three.arrivals != one.arrivals);  // the seed actually matters

  for (size_t s = 0; s < one.arrivals.size(); ++s) {
    CHECK(one.served[s] <= one.arrivals[s]);
    CHECK(one.availability[s].mean >= 0.0);
    CHECK(one.availability[s].mean <= 1.0);
  }
  CHECK(one.warmup == doctest::Approx(2000.0));  // default: horizon / 10
}

TEST_CASE("empirical means track the exact analysis") {
  Bundle b = optimized_bundle("two_station_symmetric.json");
  SimConfig cfg;
  cfg.fleet = 8;
  cfg.horizon = 40000;
  cfg.seed = 12;
  SimReport rep = simulate(b.net, b.policy, cfg);
  PerformanceReport mva = analyze_fleet(b.net, b.solution, cfg.fleet);

  for (int s = 0; s < b.net.num_stations(); ++s)
    CHECK(std::fabs(rep.availability[s].mean - mva.availability[s]) <= rep.availability[s].half_width);
  double emp_road = rep.total_road_occupancy.mean, exact_road = 0;
  for (int i = b.net.num_stations(); i < b.net.num_queues(); ++i) exact_road += mva.mean_count[i];
  CHECK(std::fabs(emp_road - exact_road) <= rep.total_road_occupancy.half_width);
  // occupancy variance is positive and finite on every queue
  for (double v : rep.occupancy_variance) {
    CHECK(v >= 0.0);
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("travel-time families leave analytic predictions untouched (insensitivity)") {
  Bundle b = optimized_bundle("two_station_symmetric.json");
  SimConfig cfg;
  cfg.fleet = 8;
  cfg.horizon = 40000;
  cfg.seed = 5;
  SimReport exp_rep = simulate(b.net, b.policy, cfg);
  cfg.family = TravelTimeFamily::Deterministic;
  SimReport det_rep = simulate(b.net, b.policy, cfg);
  cfg.family = TravelTimeFamily::Lognormal;
  cfg.lognormal_sigma = 0.4;
  SimReport log_rep = simulate(b.net, b.policy, cfg);

  for (int s = 0; s < b.net.num_stations(); ++s) {
    double se_exp = exp_rep.availability[s].half_width / 2.093;
    double se_det = det_rep.availability[s].half_width / 2.093;
    double pooled = std::sqrt(se_exp * se_exp + se_det * se_det);
    CHECK(std::fabs(exp_rep.availability[s].mean - det_rep.availability[s].mean) < 3 * pooled + 1e-9);
    CHECK(log_rep.availability[s].mean > 0.0);
  }
}

TEST_CASE("rebalancing shares are tracked separately from customer trips") {
  Bundle b = optimized_bundle("two_station_asymmetric.json");
  SimConfig cfg;
  cfg.fleet = 10;
  cfg.horizon = 30000;
  cfg.seed = 3;
  SimReport rep = simulate(b.net, b.policy, cfg);

  CHECK(rep.rebalancing_trips > 0);
  CHECK(rep.rebalancing_trip_share > 0.0);
  CHECK(rep.rebalancing_trip_share < 1.0);
  CHECK(rep.rebalancing_travel_share > 0.0);
  CHECK(rep.rebalancing_travel_share < 1.0);
  // one of four road-time units is rebalancing in the optimal flow
  CHECK(rep.rebalancing_travel_share == doctest::Approx(0.25).epsilon(0.15));
  CHECK(rep.customer_trips + rep.rebalancing_trips > 0);
}

TEST_CASE("traces sample the requested roads on a fixed grid") {
  Bundle b = optimized_bundle("two_station_symmetric.json");
  SimConfig cfg;
  cfg.fleet = 5;
  cfg.horizon = 5000;
  cfg.seed = 9;
  cfg.sample_interval = 10.0;
  cfg.traced_roads = {b.net.queue_index("rAB")};
  SimReport rep = simulate(b.net, b.policy, cfg);

  REQUIRE(rep.traced_roads.size() == 1);
  REQUIRE(!rep.trace_times.empty());
  CHECK(rep.trace_counts[0].size() == rep.trace_times.size());
  for (size_t t = 1; t < rep.trace_times.size(); ++t)
    CHECK(rep.trace_times[t] - rep.trace_times[t - 1] == doctest::Approx(10.0));
  for (int c : rep.trace_counts[0]) {
    CHECK(c >= 0);
    CHECK(c <= cfg.fleet);
  }

  std::vector<double> hist = occupancy_histogram(rep, b.net.queue_index("rAB"));
  double mass = 0;
  for (double p : hist) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(occupancy_histogram(rep, b.net.queue_index("rBA")), ValidationError);
}

TEST_CASE("simulation validates its configuration") {
  Bundle b = optimized_bundle("two_station_symmetric.json");
  SimConfig cfg;
  cfg.fleet = 0;
  CHECK_THROWS_AS(simulate(b.net, b.policy, cfg), ValidationError);
  cfg.fleet = 2;
  cfg.horizon = -1;
  CHECK_THROWS_AS(simulate(b.net, b.policy, cfg), ValidationError);
  cfg.horizon = 1000;
  cfg.batches = 0;
  CHECK_THROWS_AS(simulate(b.net, b.policy, cfg), ValidationError);
}
