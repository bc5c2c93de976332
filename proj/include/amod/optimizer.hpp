#pragma once
// Asymptotically optimal routing + rebalancing synthesis: assembles the
// road-flow linear program, solves it, re-checks every constraint, recovers
// rebalancing rates, and decomposes the flows into a routing policy.

#include <string>
#include <vector>

#include "amod/lp.hpp"
#include "amod/network.hpp"
#include "amod/perf.hpp"
#include "amod/traffic.hpp"

namespace amod {

enum class CapacityMode { Baseline, Conservative };

std::string to_string(CapacityMode mode);

// Conservative capacity: the Poisson mean whose CDF at floor(C) equals
// 1 - epsilon, so stationary loads at the adjusted value overflow the
// nominal capacity with probability at most epsilon.
double adjust_capacity(double capacity, double epsilon);

struct LpModel {
  LinearProgram lp;
  int num_roads = 0;
  int num_classes = 0;
  CapacityMode mode = CapacityMode::Baseline;
  double epsilon = 0.0;
  std::vector<double> capacity_rhs;  // per road: C (baseline) or adjusted
  std::vector<int> capacity_row;     // per road: LP row index

  // flow variable of class k on road r (road index counts from 0)
  int flow_var(int cls, int road) const { return cls * num_roads + road; }
};

// One flow variable per (class, road). Rows: per-vertex divergence for
// customer classes (rate out at the origin, rate in at the destination),
// zero-divergence transshipment plus source/sink antisymmetry and
// nonnegative injection for rebalancing classes, per-station rebalancing
// balance against the customer imbalance, and per-road capacity in the
// chosen mode.
LpModel build_lp(const AmodNetwork& network, CapacityMode mode, double epsilon);

struct FlowSolution {
  CapacityMode mode = CapacityMode::Baseline;
  double epsilon = 0.0;
  double objective = 0.0;                 // total expected road time rate
  std::vector<double> flows;              // K x NR row-major
  std::vector<double> road_flow;          // per road: sum over classes
  std::vector<double> road_load;          // per road: T * flow
  std::vector<double> capacity_rhs;       // per road capacity used by the LP
  std::vector<double> rebalancing_rates;  // per rebalancing class
  std::vector<std::string> binding_capacity_rows;
  int lp_iterations = 0;
};

// build + solve + verify; throws InfeasibleError naming binding capacity
// rows when no feasible flow exists.
FlowSolution solve_a_oscarr(const AmodNetwork& network, CapacityMode mode, double epsilon);

// Independent re-check of the flow solution against a freshly assembled
// constraint set (tolerance 1e-7); throws NumericError on violation.
void verify_balance(const AmodNetwork& network, const FlowSolution& solution);

// Strips cycles per class and converts the acyclic flows into per-vertex
// proportional routing splits. Classes without flow are omitted from the
// policy support.
RoutingPolicy decompose_to_policy(const AmodNetwork& network, const FlowSolution& solution);

// Finite-fleet performance of the optimized policy versus the asymptotic
// objective: expected_road_time(m) = ratio(m) * objective, ratio = G(m-1)/G(m).
struct GapPoint {
  int fleet;
  double g_ratio;
  double expected_road_time;
};
std::vector<GapPoint> finite_m_gap(const AmodNetwork& network, const FlowSolution& solution,
                                   const std::vector<int>& fleet_sizes);

}  // namespace amod
