#include "amod/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "amod/poisson.hpp"

namespace amod {

std::string to_string(CapacityMode mode) {
  return mode == CapacityMode::Baseline ? "baseline" : "conservative";
}

double adjust_capacity(double capacity, double epsilon) { return capacity_quantile(capacity, epsilon); }

LpModel build_lp(const AmodNetwork& net, CapacityMode mode, double epsilon) {
  if (mode == CapacityMode::Conservative && !(epsilon > 0 && epsilon < 1))
    throw ValidationError("conservative mode needs epsilon in (0, 1)");
  LpModel model;
  model.mode = mode;
  model.epsilon = epsilon;
  int nr = model.num_roads = net.num_roads();
  int nk = model.num_classes = net.num_classes();
  int ns = net.num_stations();
  LinearProgram& lp = model.lp;

  for (int k = 0; k < nk; ++k) {
    const TripClass& c = net.classes()[k];
    std::string tag = (c.kind == TripKind::Customer ? "q" : "r") + net.queue(c.origin).id + "-" +
                      net.queue(c.destination).id;
    for (int r = 0; r < nr; ++r)
      lp.add_var("pi[" + tag + "][" + net.queue(ns + r).id + "]", net.queue(ns + r).travel_time);
  }

  // Divergence of class k at vertex v: sum of outgoing minus incoming flow.
  auto divergence = [&](int k, int v) {
    std::vector<std::pair<int, double>> coeffs;
    for (int r : net.roads_out(v)) coeffs.emplace_back(model.flow_var(k, r - ns), 1.0);
    for (int r : net.roads_in(v)) coeffs.emplace_back(model.flow_var(k, r - ns), -1.0);
    return coeffs;
  };
  auto vertex_name = [&](int v) { return std::to_string(net.vertex_ids()[v]); };

  for (int k = 0; k < nk; ++k) {
    const TripClass& c = net.classes()[k];
    int vo = net.queue(c.origin).parent, vd = net.queue(c.destination).parent;
    std::string tag = (c.kind == TripKind::Customer ? "q" : "r") + net.queue(c.origin).id + "-" +
                      net.queue(c.destination).id;
    if (c.kind == TripKind::Customer) {
      // Customer commodity: fixed divergence +rate at the origin vertex,
      // -rate at the destination vertex, zero elsewhere.
      for (int v = 0; v < net.num_vertices(); ++v) {
        double d = v == vo ? c.rate : v == vd ? -c.rate : 0.0;
        lp.rows.push_back({divergence(k, v), RowSense::Equal, d, "div[" + tag + "][v" + vertex_name(v) + "]"});
      }
    } else {
      // Rebalancing commodity: free injection at the origin, matching
      // absorption at the destination, conservation everywhere else.
      for (int v = 0; v < net.num_vertices(); ++v) {
        if (v == vo || v == vd) continue;
        lp.rows.push_back({divergence(k, v), RowSense::Equal, 0.0, "div[" + tag + "][v" + vertex_name(v) + "]"});
      }
      auto anti = divergence(k, vo);
      for (auto& [var, coeff] : divergence(k, vd)) anti.emplace_back(var, coeff);
      lp.rows.push_back({anti, RowSense::Equal, 0.0, "antisym[" + tag + "]"});
      lp.rows.push_back({divergence(k, vo), RowSense::GreaterEqual, 0.0, "inject[" + tag + "]"});
    }
  }

  // Station balance: net rebalancing divergence at each station vertex
  // offsets the customer imbalance (departures minus arrivals).
  for (int s = 0; s < ns; ++s) {
    int v = net.queue(s).parent;
    std::vector<std::pair<int, double>> coeffs;
    double imbalance = 0.0;
    for (int k = 0; k < nk; ++k) {
      const TripClass& c = net.classes()[k];
      if (c.kind == TripKind::Customer) {
        if (c.origin == s) imbalance += c.rate;
        if (c.destination == s) imbalance -= c.rate;
      } else {
        for (auto& e : divergence(k, v)) coeffs.push_back(e);
      }
    }
    lp.rows.push_back({coeffs, RowSense::Equal, -imbalance, "balance[" + net.queue(s).id + "]"});
  }

  // Per-road capacity on the total load T * flow.
  model.capacity_rhs.resize(nr);
  model.capacity_row.resize(nr);
  for (int r = 0; r < nr; ++r) {
    const Queue& q = net.queue(ns + r);
    double cap = mode == CapacityMode::Baseline ? q.capacity : adjust_capacity(q.capacity, epsilon);
    model.capacity_rhs[r] = cap;
    std::vector<std::pair<int, double>> coeffs;
    for (int k = 0; k < nk; ++k) coeffs.emplace_back(model.flow_var(k, r), q.travel_time);
    model.capacity_row[r] = static_cast<int>(lp.rows.size());
    lp.rows.push_back({coeffs, RowSense::LessEqual, cap, "cap[" + q.id + "]"});
  }
  return model;
}

FlowSolution solve_a_oscarr(const AmodNetwork& net, CapacityMode mode, double epsilon) {
  LpModel model = build_lp(net, mode, epsilon);
  LpSolution lps = solve_lp(model.lp);
  if (lps.status == LpStatus::Infeasible) {
    std::vector<std::string> caps;
    for (const auto& name : lps.infeasible_rows)
      if (name.rfind("cap[", 0) == 0) caps.push_back(name);
    if (caps.empty()) caps = lps.infeasible_rows;
    std::string msg = "no feasible routing satisfies the capacities in " + to_string(mode) + " mode";
    if (!caps.empty()) {
      msg += " (unsatisfied: ";
      for (size_t i = 0; i < caps.size(); ++i) msg += (i ? ", " : "") + caps[i];
      msg += ")";
    }
    throw InfeasibleError(msg, caps);
  }
  if (lps.status == LpStatus::Unbounded)
    throw NumericError("routing program is unbounded; travel times must be positive");

  int nr = model.num_roads, nk = model.num_classes, ns = net.num_stations();
  FlowSolution sol;
  sol.mode = mode;
  sol.epsilon = epsilon;
  sol.objective = lps.objective;
  sol.capacity_rhs = model.capacity_rhs;
  sol.lp_iterations = lps.iterations;
  sol.flows.assign(static_cast<size_t>(nk) * nr, 0.0);
  for (int k = 0; k < nk; ++k)
    for (int r = 0; r < nr; ++r) {
      double f = lps.x[model.flow_var(k, r)];
      sol.flows[static_cast<size_t>(k) * nr + r] = f > 1e-11 ? f : 0.0;
    }
  sol.road_flow.assign(nr, 0.0);
  sol.road_load.assign(nr, 0.0);
  for (int r = 0; r < nr; ++r) {
    for (int k = 0; k < nk; ++k) sol.road_flow[r] += sol.flows[static_cast<size_t>(k) * nr + r];
    sol.road_load[r] = sol.road_flow[r] * net.queue(ns + r).travel_time;
    if (sol.road_load[r] >= sol.capacity_rhs[r] - 1e-7 * std::max(1.0, sol.capacity_rhs[r]))
      sol.binding_capacity_rows.push_back("cap[" + net.queue(ns + r).id + "]");
  }
  // Recovered rebalancing rates: divergence at each class origin.
  for (int k = 0; k < nk; ++k) {
    const TripClass& c = net.classes()[k];
    if (c.kind != TripKind::Rebalancing) continue;
    int vo = net.queue(c.origin).parent;
    double rate = 0.0;
    for (int r : net.roads_out(vo)) rate += sol.flows[static_cast<size_t>(k) * nr + (r - ns)];
    for (int r : net.roads_in(vo)) rate -= sol.flows[static_cast<size_t>(k) * nr + (r - ns)];
    sol.rebalancing_rates.push_back(rate > 1e-11 ? rate : 0.0);
  }
  verify_balance(net, sol);
  return sol;
}

void verify_balance(const AmodNetwork& net, const FlowSolution& sol) {
  // Evaluate every constraint of a freshly assembled model on the flows.
  LpModel model = build_lp(net, sol.mode, sol.epsilon);
  if (sol.flows.size() != static_cast<size_t>(model.num_classes) * model.num_roads)
    throw ValidationError("flow solution does not match the network");
  double scale = 1.0;
  for (double f : sol.flows) scale = std::max(scale, std::abs(f));
  for (const auto& row : model.lp.rows) {
    double lhs = 0.0;
    for (auto [j, v] : row.coeffs) lhs += v * sol.flows[j];
    double defect = 0.0;
    if (row.sense == RowSense::Equal)
      defect = std::abs(lhs - row.rhs);
    else if (row.sense == RowSense::LessEqual)
      defect = std::max(0.0, lhs - row.rhs);
    else
      defect = std::max(0.0, row.rhs - lhs);
    if (defect > 1e-7 * scale)
      throw NumericError("flow solution violates " + row.name + " by " + std::to_string(defect));
  }
}

RoutingPolicy decompose_to_policy(const AmodNetwork& net, const FlowSolution& sol) {
  int nr = net.num_roads(), nk = net.num_classes(), ns = net.num_stations();
  if (sol.flows.size() != static_cast<size_t>(nk) * nr)
    throw ValidationError("flow solution does not match the network");
  RoutingPolicy policy;
  policy.alpha.resize(nk);

  int reb_seen = 0;
  for (int k = 0; k < nk; ++k) {
    const TripClass& c = net.classes()[k];
    double rate = c.kind == TripKind::Customer ? c.rate : sol.rebalancing_rates.at(reb_seen++);
    std::vector<double> f(sol.flows.begin() + static_cast<size_t>(k) * nr,
                          sol.flows.begin() + static_cast<size_t>(k + 1) * nr);
    for (double& v : f)
      if (v < 1e-11) v = 0.0;
    if (rate <= 1e-11) continue;  // class carries no flow: no policy support

    // Strip circulation: depth-first search for a positive-flow cycle,
    // cancel its minimum flow, repeat until the support is acyclic. Cycle
    // removal keeps every vertex divergence intact, so the remainder is an
    // acyclic origin->destination flow.
    int nv = net.num_vertices();
    while (true) {
      // colors: 0 unvisited, 1 on the current path, 2 done
      std::vector<int> color(nv, 0), via_road(nv, -1), path;
      std::vector<int> cycle;  // road indices of a found cycle
      for (int root = 0; root < nv && cycle.empty(); ++root) {
        if (color[root] != 0) continue;
        std::vector<std::pair<int, size_t>> stack{{root, 0}};
        color[root] = 1;
        path = {root};
        while (!stack.empty() && cycle.empty()) {
          auto& [v, ei] = stack.back();
          const auto& out = net.roads_out(v);
          bool descended = false;
          while (ei < out.size()) {
            int road = out[ei] - ns;
            ++ei;
            if (f[road] <= 0) continue;
            int w = net.queue(ns + road).child;
            if (color[w] == 1) {  // back edge closes a cycle w .. v -> w
              size_t pos = std::find(path.begin(), path.end(), w) - path.begin();
              for (size_t i = pos + 1; i < path.size(); ++i) cycle.push_back(via_road[path[i]]);
              cycle.push_back(road);
              break;
            }
            if (color[w] == 0) {
              color[w] = 1;
              via_road[w] = road;
              path.push_back(w);
              stack.emplace_back(w, 0);
              descended = true;
              break;
            }
          }
          if (descended || !cycle.empty()) continue;
          if (ei >= out.size()) {
            color[v] = 2;
            path.pop_back();
            stack.pop_back();
          }
        }
      }
      if (cycle.empty()) break;
      double cmin = std::numeric_limits<double>::infinity();
      for (int road : cycle) cmin = std::min(cmin, f[road]);
      for (int road : cycle) {
        f[road] -= cmin;
        if (f[road] < 1e-11) f[road] = 0.0;
      }
    }

    // Proportional splits at each decision vertex reproduce the acyclic flow
    // exactly: split(road j at vertex u) = f_j / sum of f leaving u.
    int vd = net.queue(c.destination).parent;
    auto splits_at = [&](int u) {
      double total = 0.0;
      std::vector<std::pair<int, double>> dist;
      for (int r : net.roads_out(u))
        if (f[r - ns] > 0) total += f[r - ns];
      if (!(total > 0))
        throw NumericError("flow for class " + net.queue(c.origin).id + "->" + net.queue(c.destination).id +
                           " strands at vertex " + std::to_string(net.vertex_ids()[u]));
      for (int r : net.roads_out(u))
        if (f[r - ns] > 0) dist.emplace_back(r, f[r - ns] / total);
      return dist;
    };
    policy.alpha[k][c.origin] = splits_at(net.queue(c.origin).parent);
    for (int r = 0; r < nr; ++r) {
      if (f[r] <= 0) continue;
      int head = net.queue(ns + r).child;
      if (head == vd) continue;  // vehicle is absorbed at the destination
      policy.alpha[k][ns + r] = splits_at(head);
    }
  }
  return policy;
}

std::vector<GapPoint> finite_m_gap(const AmodNetwork& net, const FlowSolution& sol,
                                   const std::vector<int>& fleet_sizes) {
  AmodNetwork tuned = net.with_rebalancing_rates(sol.rebalancing_rates);
  RoutingPolicy policy = decompose_to_policy(tuned, sol);
  RoutingMatrix matrix = assemble_routing_matrix(tuned, policy);
  NetworkSolution traffic = solve_traffic_equations(tuned, matrix);
  std::vector<GapPoint> out;
  int max_m = 0;
  for (int m : fleet_sizes) {
    if (m < 1) throw ValidationError("fleet sizes must be >= 1");
    max_m = std::max(max_m, m);
  }
  if (max_m == 0) return out;
  PerformanceReport rep = analyze_fleet(tuned, traffic, max_m);
  for (int m : fleet_sizes) {
    double ratio = rep.throughput_series[m - 1];
    out.push_back({m, ratio, ratio * sol.objective});
  }
  return out;
}

}  // namespace amod
