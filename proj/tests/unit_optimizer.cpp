#include <cmath>

#include <doctest.h>

#include "oracles.hpp"
#include "amod/optimizer.hpp"
#include "amod/poisson.hpp"
#include "amod/scenario.hpp"
#include "amod/traffic.hpp"

using namespace amod;

namespace {

std::string scenario_file(const char* name) { return std::string(AMOD_SCENARIO_DIR) + "/" + name; }

AmodNetwork load_net(const char* name) {
  Scenario sc = load_scenario(scenario_file(name));
  return AmodNetwork::build(sc.graph, sc.demands);
}

}  // namespace

TEST_CASE("conservative capacities come from the Poisson quantile") {
  CHECK(adjust_capacity(3.0, 0.1) == doctest::Approx(1.7447695628249118).epsilon(1e-10));
  CHECK(adjust_capacity(30.0, 0.1) < 30.0);
  CHECK(to_string(CapacityMode::Baseline) == "baseline");
  CHECK(to_string(CapacityMode::Conservative) == "conservative");
}

TEST_CASE("LP assembly: variable and row shape on the two-station network") {
  AmodNetwork net = load_net("two_station_asymmetric.json");
  LpModel model = build_lp(net, CapacityMode::Baseline, 0.1);
  // 4 classes (2 customer + 2 rebalancing) x 2 roads
  CHECK(model.lp.num_vars == 8);
  CHECK(model.num_roads == 2);
  CHECK(model.num_classes == 4);
  CHECK(model.flow_var(1, 1) == 3);
  REQUIRE(model.capacity_row.size() == 2);
  for (int r = 0; r < 2; ++r) {
    const LpRow& cap = model.lp.rows[model.capacity_row[r]];
    CHECK(cap.sense == RowSense::LessEqual);
    CHECK(cap.rhs == doctest::Approx(10.0));
    CHECK(cap.name.substr(0, 4) == "cap[");
  }
  LpModel cons = build_lp(net, CapacityMode::Conservative, 0.1);
  CHECK(cons.capacity_rhs[0] == doctest::Approx(capacity_quantile(10.0, 0.1)).epsilon(1e-12));
}

TEST_CASE("two-station asymmetric: objective 4 with one unit of rebalancing") {
  AmodNetwork net = load_net("two_station_asymmetric.json");
  FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  CHECK(flow.objective == doctest::Approx(4.0).epsilon(1e-9));
  REQUIRE(flow.rebalancing_rates.size() == 2);
  CHECK(flow.rebalancing_rates[0] == doctest::Approx(0.0));  // A->B
  CHECK(flow.rebalancing_rates[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(flow.road_flow[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(flow.road_flow[1] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(flow.binding_capacity_rows.empty());

  // conservative tightens capacities but they stay slack here
  FlowSolution cons = solve_a_oscarr(net, CapacityMode::Conservative, 0.1);
  CHECK(cons.objective >= flow.objective - 1e-12);
  CHECK(cons.objective == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("symmetric demand needs no rebalancing") {
  AmodNetwork net = load_net("two_station_symmetric.json");
  FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  CHECK(flow.objective == doctest::Approx(4.0).epsilon(1e-9));  // 2 x rate 1 x T 2
  for (double r : flow.rebalancing_rates) CHECK(r == doctest::Approx(0.0));
}

TEST_CASE("capacity squeeze surfaces an infeasibility certificate") {
  RoadGraph g;
  g.vertices = {0, 1};
  g.stations = {{"A", QueueKind::Station, 0, 0, 0, 0}, {"B", QueueKind::Station, 1, 1, 0, 0}};
  g.roads = {{"rAB", QueueKind::Road, 0, 1, 1.0, 0.5}, {"rBA", QueueKind::Road, 1, 0, 1.0, 0.5}};
  DemandSet d;
  d.customers = {{"A", "B", 2.0}, {"B", "A", 1.0}};
  AmodNetwork net = AmodNetwork::build(g, d);
  CHECK_THROWS_AS(solve_a_oscarr(net, CapacityMode::Baseline, 0.1), InfeasibleError);
  try {
    solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  } catch (const InfeasibleError& e) {
    CHECK(!e.binding_rows().empty());
  }
}

TEST_CASE("tampered flows fail the independent balance re-check") {
  AmodNetwork net = load_net("two_station_asymmetric.json");
  FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  verify_balance(net, flow);  // the genuine solution passes
  FlowSolution bad = flow;
  bad.flows[0] += 0.1;
  CHECK_THROWS_AS(verify_balance(net, bad), NumericError);
}

TEST_CASE("grid LP matches the independent path-variable formulation") {
  AmodNetwork net = load_net("grid5.json");
  for (CapacityMode mode : {CapacityMode::Baseline, CapacityMode::Conservative}) {
    FlowSolution flow = solve_a_oscarr(net, mode, 0.1);
    amod::testing::PathOracleResult oracle = amod::testing::path_lp_oracle(net, mode, 0.1);
    REQUIRE(oracle.feasible);
    CHECK(std::fabs(flow.objective - oracle.objective) <= 1e-6 * std::fabs(oracle.objective));
  }
  // enumeration scale matches the design note: 420 simple paths per commodity family
  amod::testing::PathOracleResult oracle = amod::testing::path_lp_oracle(net, CapacityMode::Baseline, 0.1);
  CHECK(oracle.num_paths == 840);  // 420 customer + 420 rebalancing path variables
}

TEST_CASE("decomposed policy reproduces the optimal flows through the traffic equations") {
  for (const char* name : {"two_station_asymmetric.json", "grid5.json"}) {
    AmodNetwork net = load_net(name);
    FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
    RoutingPolicy policy = decompose_to_policy(net, flow);
    AmodNetwork routed = net.with_rebalancing_rates(flow.rebalancing_rates);
    NetworkSolution sol = solve_traffic_equations(routed, assemble_routing_matrix(routed, policy));
    CHECK(sol.residual <= 1e-9);

    int ns = net.num_stations(), nr = net.num_roads(), nk = net.num_classes();
    double worst = 0;
    for (int r = 0; r < nr; ++r)
      for (int k = 0; k < nk; ++k)
        worst = std::max(worst, std::fabs(sol.pi(ns + r, k, nk) - flow.flows[static_cast<size_t>(k) * nr + r]));
    CHECK(worst <= 1e-7);

    // balanced by construction: every station's gamma is 1
    for (int s = 0; s < ns; ++s) CHECK(sol.relative_utilization[s] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("finite-fleet gap closes toward the asymptotic objective") {
  AmodNetwork net = load_net("two_station_asymmetric.json");
  FlowSolution flow = solve_a_oscarr(net, CapacityMode::Baseline, 0.1);
  auto gap = finite_m_gap(net, flow, {1, 5, 20, 100, 1000});
  REQUIRE(gap.size() == 5);
  for (size_t i = 0; i < gap.size(); ++i) {
    CHECK(gap[i].g_ratio > 0.0);
    CHECK(gap[i].g_ratio < 1.0);
    CHECK(gap[i].expected_road_time == doctest::Approx(gap[i].g_ratio * flow.objective).epsilon(1e-12));
    if (i > 0) CHECK(gap[i].g_ratio > gap[i - 1].g_ratio);
  }
  CHECK(gap.back().g_ratio > 0.99);
}
