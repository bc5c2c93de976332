#include "amod/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace amod {

namespace {

void check_id(const std::string& id, const char* what) {
  if (id.empty()) throw ValidationError(std::string(what) + " id must be non-empty");
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) throw ValidationError(std::string(what) + " id '" + id + "' contains unsupported character");
  }
}

}  // namespace

AmodNetwork AmodNetwork::build(const RoadGraph& graph, const DemandSet& demands) {
  AmodNetwork net;

  if (graph.vertices.empty()) throw ValidationError("road graph has no vertices");
  net.vertex_ids_ = graph.vertices;
  std::sort(net.vertex_ids_.begin(), net.vertex_ids_.end());
  for (int idx = 0; idx < static_cast<int>(net.vertex_ids_.size()); ++idx) {
    if (!net.vertex_index_.emplace(net.vertex_ids_[idx], idx).second)
      throw ValidationError("duplicate vertex id " + std::to_string(net.vertex_ids_[idx]));
  }
  int nv = net.num_vertices();

  if (graph.stations.empty()) throw ValidationError("network needs at least one station");
  std::vector<Queue> stations = graph.stations;
  std::sort(stations.begin(), stations.end(), [](const Queue& a, const Queue& b) { return a.id < b.id; });
  net.station_at_.assign(nv, -1);
  for (auto& s : stations) {
    check_id(s.id, "station");
    auto it = net.vertex_index_.find(s.parent);
    if (it == net.vertex_index_.end())
      throw ValidationError("station '" + s.id + "' references unknown vertex " + std::to_string(s.parent));
    Queue q = s;
    q.kind = QueueKind::Station;
    q.parent = q.child = it->second;  // self-loop edge
    q.travel_time = 0.0;
    q.capacity = 0.0;
    int qi = static_cast<int>(net.queues_.size());
    if (!net.queue_index_.emplace(q.id, qi).second)
      throw ValidationError("duplicate queue id '" + q.id + "'");
    if (net.station_at_[q.parent] != -1)
      throw ValidationError("two stations share vertex " + std::to_string(s.parent));
    net.station_at_[q.parent] = qi;
    net.queues_.push_back(q);
  }
  net.num_stations_ = static_cast<int>(net.queues_.size());

  std::vector<Queue> roads = graph.roads;
  std::sort(roads.begin(), roads.end(), [](const Queue& a, const Queue& b) { return a.id < b.id; });
  net.roads_out_.assign(nv, {});
  net.roads_in_.assign(nv, {});
  for (auto& r : roads) {
    check_id(r.id, "road");
    auto pit = net.vertex_index_.find(r.parent);
    auto cit = net.vertex_index_.find(r.child);
    if (pit == net.vertex_index_.end() || cit == net.vertex_index_.end())
      throw ValidationError("road '" + r.id + "' references an unknown vertex");
    if (pit->second == cit->second)
      throw ValidationError("road '" + r.id + "' is a self-loop; roads must join distinct vertices");
    if (!(r.travel_time > 0) || !std::isfinite(r.travel_time))
      throw ValidationError("road '" + r.id + "' needs travel_time > 0");
    if (!(r.capacity > 0) || !std::isfinite(r.capacity))
      throw ValidationError("road '" + r.id + "' needs capacity > 0");
    Queue q = r;
    q.kind = QueueKind::Road;
    q.parent = pit->second;
    q.child = cit->second;
    int qi = static_cast<int>(net.queues_.size());
    if (!net.queue_index_.emplace(q.id, qi).second)
      throw ValidationError("duplicate queue id '" + q.id + "'");
    net.roads_out_[q.parent].push_back(qi);
    net.roads_in_[q.child].push_back(qi);
    net.queues_.push_back(q);
  }

  // Customer classes from demands, canonical (origin, destination) order.
  std::set<std::pair<int, int>> seen;
  for (const auto& d : demands.customers) {
    int o = net.queue_index(d.origin);
    int t = net.queue_index(d.destination);
    if (o < 0 || o >= net.num_stations_)
      throw ValidationError("demand origin '" + d.origin + "' is not a station");
    if (t < 0 || t >= net.num_stations_)
      throw ValidationError("demand destination '" + d.destination + "' is not a station");
    if (o == t) throw ValidationError("demand '" + d.origin + "'->'" + d.destination + "' must join distinct stations");
    if (!(d.rate > 0) || !std::isfinite(d.rate))
      throw ValidationError("demand '" + d.origin + "'->'" + d.destination + "' needs rate > 0");
    if (!seen.emplace(o, t).second)
      throw ValidationError("duplicate demand pair '" + d.origin + "'->'" + d.destination + "'");
    net.classes_.push_back({TripKind::Customer, o, t, d.rate});
  }
  if (net.classes_.empty()) throw ValidationError("demand set is empty");
  std::sort(net.classes_.begin(), net.classes_.end(), [](const TripClass& a, const TripClass& b) {
    return std::make_pair(a.origin, a.destination) < std::make_pair(b.origin, b.destination);
  });

  // Rebalancing classes: explicit pair list, or every ordered station pair.
  std::vector<std::pair<int, int>> reb;
  if (demands.rebalancing_pairs.has_value()) {
    std::set<std::pair<int, int>> rseen;
    for (const auto& [os, ts] : *demands.rebalancing_pairs) {
      int o = net.queue_index(os), t = net.queue_index(ts);
      if (o < 0 || o >= net.num_stations_ || t < 0 || t >= net.num_stations_)
        throw ValidationError("rebalancing pair '" + os + "'->'" + ts + "' must join stations");
      if (o == t) throw ValidationError("rebalancing pair '" + os + "'->'" + ts + "' must join distinct stations");
      if (!rseen.emplace(o, t).second)
        throw ValidationError("duplicate rebalancing pair '" + os + "'->'" + ts + "'");
      reb.emplace_back(o, t);
    }
  } else {
    for (int o = 0; o < net.num_stations_; ++o)
      for (int t = 0; t < net.num_stations_; ++t)
        if (o != t) reb.emplace_back(o, t);
  }
  std::sort(reb.begin(), reb.end());
  for (auto [o, t] : reb) net.classes_.push_back({TripKind::Rebalancing, o, t, 0.0});

  net.origin_classes_.assign(net.num_stations_, {});
  net.destination_classes_.assign(net.num_stations_, {});
  for (int k = 0; k < net.num_classes(); ++k) {
    net.origin_classes_[net.classes_[k].origin].push_back(k);
    net.destination_classes_[net.classes_[k].destination].push_back(k);
  }

  // Every station must reach every other station over roads.
  for (int s = 0; s < net.num_stations_; ++s) {
    std::vector<char> reach(nv, 0);
    std::queue<int> bfs;
    int v0 = net.queues_[s].parent;
    reach[v0] = 1;
    bfs.push(v0);
    while (!bfs.empty()) {
      int v = bfs.front();
      bfs.pop();
      for (int r : net.roads_out_[v]) {
        int u = net.queues_[r].child;
        if (!reach[u]) {
          reach[u] = 1;
          bfs.push(u);
        }
      }
    }
    for (int t = 0; t < net.num_stations_; ++t)
      if (t != s && !reach[net.queues_[t].parent])
        throw ValidationError("station " + net.queues_[s].id + " cannot reach station " + net.queues_[t].id);
  }
  return net;
}

AmodNetwork AmodNetwork::with_rebalancing_rates(const std::vector<double>& rates) const {
  AmodNetwork net = *this;
  std::vector<int> reb;
  for (int k = 0; k < num_classes(); ++k)
    if (classes_[k].kind == TripKind::Rebalancing) reb.push_back(k);
  if (rates.size() != reb.size())
    throw ValidationError("expected " + std::to_string(reb.size()) + " rebalancing rates, got " +
                          std::to_string(rates.size()));
  for (size_t j = 0; j < reb.size(); ++j) {
    if (!(rates[j] >= 0) || !std::isfinite(rates[j]))
      throw ValidationError("rebalancing rates must be finite and >= 0");
    net.classes_[reb[j]].rate = rates[j];
  }
  return net;
}

int AmodNetwork::vertex_index(int external_id) const {
  auto it = vertex_index_.find(external_id);
  return it == vertex_index_.end() ? -1 : it->second;
}

int AmodNetwork::queue_index(const std::string& id) const {
  auto it = queue_index_.find(id);
  return it == queue_index_.end() ? -1 : it->second;
}

int AmodNetwork::class_index(TripKind kind, int origin_station, int destination_station) const {
  for (int k = 0; k < num_classes(); ++k) {
    const auto& c = classes_[k];
    if (c.kind == kind && c.origin == origin_station && c.destination == destination_station) return k;
  }
  return -1;
}

double AmodNetwork::station_rate(int station) const {
  double sum = 0.0;
  for (int k : origin_classes_[station]) sum += classes_[k].rate;
  return sum;
}

std::vector<double> AmodNetwork::station_rates() const {
  std::vector<double> out(num_stations_);
  for (int s = 0; s < num_stations_; ++s) out[s] = station_rate(s);
  return out;
}

std::vector<std::vector<double>> AmodNetwork::switch_probabilities() const {
  std::vector<std::vector<double>> p(num_stations_);
  for (int s = 0; s < num_stations_; ++s) {
    const auto& ks = origin_classes_[s];
    double total = station_rate(s);
    if (!(total > 0))
      throw ValidationError("station " + queues_[s].id + " has zero departure rate (no demand or rebalancing)");
    p[s].assign(ks.size(), 0.0);
    int last_pos = -1;
    double partial = 0.0;
    for (size_t j = 0; j < ks.size(); ++j)
      if (classes_[ks[j]].rate > 0) last_pos = static_cast<int>(j);
    for (size_t j = 0; j < ks.size(); ++j) {
      if (static_cast<int>(j) == last_pos) continue;
      p[s][j] = classes_[ks[j]].rate / total;
      partial += p[s][j];
    }
    // Close the row to exactly 1 in floating point.
    p[s][last_pos] = 1.0 - partial;
  }
  return p;
}

RoutingPolicy shortest_path_policy(const AmodNetwork& net) {
  int nv = net.num_vertices();
  RoutingPolicy policy;
  policy.alpha.resize(net.num_classes());
  // Distance-to-destination per destination station via Dijkstra on the
  // reversed road graph; ties broken toward the lower road index.
  std::vector<std::vector<double>> dist_to(net.num_stations(), std::vector<double>(nv, std::numeric_limits<double>::infinity()));
  for (int s = 0; s < net.num_stations(); ++s) {
    auto& dist = dist_to[s];
    int target = net.queue(s).parent;
    dist[target] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, target);
    while (!heap.empty()) {
      auto [d, v] = heap.top();
      heap.pop();
      if (d > dist[v]) continue;
      for (int r : net.roads_in(v)) {
        const Queue& q = net.queue(r);
        double nd = d + q.travel_time;
        if (nd < dist[q.parent]) {
          dist[q.parent] = nd;
          heap.emplace(nd, q.parent);
        }
      }
    }
  }
  for (int k = 0; k < net.num_classes(); ++k) {
    const TripClass& c = net.classes()[k];
    const auto& dist = dist_to[c.destination];
    int target = net.queue(c.destination).parent;
    auto next_road = [&](int v) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int r : net.roads_out(v)) {
        const Queue& q = net.queue(r);
        double d = q.travel_time + dist[q.child];
        if (d < best_d - 1e-15) {
          best_d = d;
          best = r;
        }
      }
      if (best < 0)
        throw ValidationError("no route toward station " + net.queue(c.destination).id + " from vertex " +
                              std::to_string(net.vertex_ids()[v]));
      return best;
    };
    // Decision at the origin station and at the head of every road that does
    // not already deliver the vehicle to its destination.
    policy.alpha[k][c.origin] = {{next_road(net.queue(c.origin).parent), 1.0}};
    for (int r = net.num_stations(); r < net.num_queues(); ++r) {
      int head = net.queue(r).child;
      if (head == target) continue;
      policy.alpha[k][r] = {{next_road(head), 1.0}};
    }
  }
  return policy;
}

int RoutingMatrix::state_index(int queue, int cls) const {
  auto it = std::lower_bound(states.begin(), states.end(), std::make_pair(queue, cls),
                             [](const State& s, const std::pair<int, int>& key) {
                               return std::make_pair(s.queue, s.cls) < key;
                             });
  if (it == states.end() || it->queue != queue || it->cls != cls) return -1;
  return static_cast<int>(it - states.begin());
}

namespace {

// Iterative Tarjan SCC count on the routing-state graph.
int count_sccs(const std::vector<std::vector<std::pair<int, double>>>& rows) {
  int n = static_cast<int>(rows.size());
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
  std::vector<int> stack, call_state, call_edge;
  int next_index = 0, sccs = 0;
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    call_state.push_back(root);
    call_edge.push_back(0);
    while (!call_state.empty()) {
      int v = call_state.back();
      int& e = call_edge.back();
      if (e == 0) {
        index[v] = low[v] = next_index++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (e < static_cast<int>(rows[v].size())) {
        int w = rows[v][e].first;
        ++e;
        if (index[w] == -1) {
          call_state.push_back(w);
          call_edge.push_back(0);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        ++sccs;
        while (true) {
          int w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          low[w] = index[v];
          if (w == v) break;
        }
      }
      call_state.pop_back();
      call_edge.pop_back();
      if (!call_state.empty()) low[call_state.back()] = std::min(low[call_state.back()], low[v]);
    }
  }
  return sccs;
}

}  // namespace

RoutingMatrix assemble_routing_matrix(const AmodNetwork& net, const RoutingPolicy& policy) {
  if (static_cast<int>(policy.alpha.size()) != net.num_classes())
    throw ValidationError("policy has " + std::to_string(policy.alpha.size()) + " classes, network has " +
                          std::to_string(net.num_classes()));
  auto p_switch = net.switch_probabilities();  // errors on zero-rate stations

  auto class_name = [&](int k) {
    const TripClass& c = net.classes()[k];
    return std::string(c.kind == TripKind::Customer ? "customer " : "rebalancing ") + net.queue(c.origin).id +
           "->" + net.queue(c.destination).id;
  };

  // Normalized split distribution for class k departing from `from_queue`.
  auto splits = [&](int k, int from_queue, int at_vertex) {
    auto it = policy.alpha[k].find(from_queue);
    if (it == policy.alpha[k].end() || it->second.empty())
      throw ValidationError("policy gap: class " + class_name(k) + " has no split at vertex " +
                            std::to_string(net.vertex_ids()[at_vertex]) + " (queue " + net.queue(from_queue).id + ")");
    double sum = 0.0;
    std::vector<std::pair<int, double>> out;
    for (auto [road, prob] : it->second) {
      if (road < net.num_stations() || road >= net.num_queues())
        throw ValidationError("policy for class " + class_name(k) + " routes onto non-road queue index " +
                              std::to_string(road));
      if (net.queue(road).parent != at_vertex)
        throw ValidationError("policy for class " + class_name(k) + " uses road " + net.queue(road).id +
                              " which does not leave vertex " + std::to_string(net.vertex_ids()[at_vertex]));
      if (!(prob >= 0) || !std::isfinite(prob))
        throw ValidationError("policy for class " + class_name(k) + " has an invalid probability");
      if (prob > 0) out.emplace_back(road, prob);
      sum += prob;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("policy splits for class " + class_name(k) + " at queue " + net.queue(from_queue).id +
                            " sum to " + std::to_string(sum) + ", expected 1");
    for (auto& [road, prob] : out) prob /= sum;
    std::sort(out.begin(), out.end());
    return out;
  };

  // Reachable (queue, class) states, breadth-first from every station state
  // whose class has positive rate.
  std::map<std::pair<int, int>, int> discovered;
  std::vector<std::pair<int, int>> frontier, order;
  for (int k = 0; k < net.num_classes(); ++k) {
    const TripClass& c = net.classes()[k];
    if (c.rate > 0) {
      auto key = std::make_pair(c.origin, k);
      if (discovered.emplace(key, 0).second) frontier.push_back(key);
    }
  }
  if (frontier.empty()) throw ValidationError("no class has positive rate");
  auto targets_of = [&](int queue, int k) {
    // Transition targets for state (queue, k).
    std::vector<std::pair<std::pair<int, int>, double>> out;
    const TripClass& c = net.classes()[k];
    if (queue < net.num_stations()) {
      for (auto [road, prob] : splits(k, queue, net.queue(queue).parent))
        out.push_back({{road, k}, prob});
      return out;
    }
    int head = net.queue(queue).child;
    if (net.station_at(head) == c.destination) {
      // Absorption with class switch.
      int dest = c.destination;
      const auto& ks = net.origin_classes(dest);
      for (size_t j = 0; j < ks.size(); ++j)
        if (p_switch[dest][j] > 0) out.push_back({{dest, ks[j]}, p_switch[dest][j]});
      return out;
    }
    for (auto [road, prob] : splits(k, queue, head)) out.push_back({{road, k}, prob});
    return out;
  };
  while (!frontier.empty()) {
    auto [queue, k] = frontier.back();
    frontier.pop_back();
    order.emplace_back(queue, k);
    for (auto& [next, prob] : targets_of(queue, k))
      if (discovered.emplace(next, 0).second) frontier.push_back(next);
  }

  RoutingMatrix matrix;
  matrix.states.reserve(order.size());
  for (auto& [key, idx] : discovered) {
    idx = static_cast<int>(matrix.states.size());
    matrix.states.push_back({key.first, key.second});
  }
  matrix.rows.resize(matrix.states.size());
  for (size_t si = 0; si < matrix.states.size(); ++si) {
    auto targets = targets_of(matrix.states[si].queue, matrix.states[si].cls);
    double sum = 0.0;
    for (auto& [next, prob] : targets) {
      matrix.rows[si].emplace_back(discovered.at(next), prob);
      sum += prob;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw NumericError("routing row failed to close to 1 (sum " + std::to_string(sum) + ")");
  }

  int sccs = count_sccs(matrix.rows);
  if (sccs != 1)
    throw ValidationError("routing chain is reducible (" + std::to_string(sccs) +
                          " strongly connected components); check policy and demand structure");
  return matrix;
}

}  // namespace amod
