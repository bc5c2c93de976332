#pragma once
// Road network + demand model: canonical queue/class structure, class-switch
// probabilities, and the (queue, class) routing-matrix assembly.
//
// Vehicles circulate through two queue kinds:
//   - Station queues: single-server FCFS; the "service" of the head vehicle
//     completes when the next demand arrives (rate lambda_tilde_i). Modeled
//     as self-loop edges of the road graph (parent == child).
//   - Road queues: infinite-server; service time is the link traversal time.
// A trip class is an origin/destination station pair, either a customer
// commodity with a fixed demand rate or a rebalancing commodity whose rate is
// chosen by the optimizer. A vehicle switches class exactly when it reaches
// the class's destination station.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amod/common.hpp"

namespace amod {

enum class QueueKind { Station, Road };

struct Queue {
  std::string id;
  QueueKind kind;
  int parent = -1;  // tail vertex (== head for stations)
  int child = -1;   // head vertex
  double travel_time = 0.0;  // roads: free-flow traversal time T_i > 0
  double capacity = 0.0;     // roads: nominal vehicle capacity C_i > 0
};

struct RoadGraph {
  std::vector<int> vertices;                  // external vertex ids
  std::vector<Queue> stations;                // station queues (self-loops)
  std::vector<Queue> roads;                   // directed road links
};

struct Demand {
  std::string origin;       // station id
  std::string destination;  // station id
  double rate = 0.0;        // arrivals per unit time, > 0
};

struct DemandSet {
  std::vector<Demand> customers;
  // Ordered station pairs allowed to carry rebalancing flow. Unset = all
  // ordered pairs; empty = rebalancing disabled.
  std::optional<std::vector<std::pair<std::string, std::string>>> rebalancing_pairs;
};

enum class TripKind { Customer, Rebalancing };

struct TripClass {
  TripKind kind;
  int origin;       // station index (canonical)
  int destination;  // station index (canonical)
  double rate;      // customer: demand rate; rebalancing: set later (default 0)
};

// Canonical, validated network model. Queue indexing: stations first (sorted
// by id), then roads (sorted by id). Class indexing: customer classes sorted
// by (origin, destination), then rebalancing classes likewise.
class AmodNetwork {
 public:
  static AmodNetwork build(const RoadGraph& graph, const DemandSet& demands);

  // Copy with the rebalancing class rates replaced (one entry per
  // rebalancing class, in class order).
  AmodNetwork with_rebalancing_rates(const std::vector<double>& rates) const;

  int num_vertices() const { return static_cast<int>(vertex_ids_.size()); }
  int num_stations() const { return num_stations_; }
  int num_roads() const { return static_cast<int>(queues_.size()) - num_stations_; }
  int num_queues() const { return static_cast<int>(queues_.size()); }
  int num_classes() const { return static_cast<int>(classes_.size()); }

  const std::vector<Queue>& queues() const { return queues_; }
  const Queue& queue(int i) const { return queues_.at(i); }
  const std::vector<TripClass>& classes() const { return classes_; }
  const std::vector<int>& vertex_ids() const { return vertex_ids_; }

  int vertex_index(int external_id) const;       // -1 if unknown
  int queue_index(const std::string& id) const;  // -1 if unknown
  int class_index(TripKind kind, int origin_station, int destination_station) const;

  // Station queue index at a vertex, or -1.
  int station_at(int vertex) const { return station_at_[vertex]; }
  // Road queue indices leaving / entering a vertex (canonical order).
  const std::vector<int>& roads_out(int vertex) const { return roads_out_[vertex]; }
  const std::vector<int>& roads_in(int vertex) const { return roads_in_[vertex]; }

  // Classes originating at / destined for station s (class indices).
  const std::vector<int>& origin_classes(int station) const { return origin_classes_[station]; }
  const std::vector<int>& destination_classes(int station) const { return destination_classes_[station]; }

  // lambda_tilde_i: total departure rate at station i (customer + current
  // rebalancing rates).
  double station_rate(int station) const;
  std::vector<double> station_rates() const;

  // p_tilde per station: probability that a departing vehicle adopts class k,
  // i.e. rate_k / lambda_tilde_i over k in origin_classes(i). The last
  // positive entry is defined as 1 minus the sum of the others so each row
  // closes to 1 exactly in floating point. Throws if lambda_tilde_i == 0.
  std::vector<std::vector<double>> switch_probabilities() const;

 private:
  std::vector<int> vertex_ids_;
  std::map<int, int> vertex_index_;
  std::vector<Queue> queues_;  // stations then roads
  std::map<std::string, int> queue_index_;
  int num_stations_ = 0;
  std::vector<TripClass> classes_;
  std::vector<int> station_at_;
  std::vector<std::vector<int>> roads_out_, roads_in_;
  std::vector<std::vector<int>> origin_classes_, destination_classes_;
};

// Routing policy: per class, a distribution over outgoing roads at each
// decision queue (the class's origin station, and every road whose head
// vertex is not the class's destination). alpha[k][from_queue] lists
// (road queue, probability) pairs, probabilities summing to 1.
struct RoutingPolicy {
  std::vector<std::map<int, std::vector<std::pair<int, double>>>> alpha;
};

// Deterministic shortest-time policy (Dijkstra on free-flow times) for every
// class; used as the analysis default when no optimized policy is supplied.
RoutingPolicy shortest_path_policy(const AmodNetwork& network);

// Sparse row-stochastic routing matrix over reachable (queue, class) states.
struct RoutingMatrix {
  struct State {
    int queue;
    int cls;
  };
  std::vector<State> states;                      // sorted by (queue, cls)
  std::vector<std::vector<std::pair<int, double>>> rows;  // state -> (state, prob)

  int num_states() const { return static_cast<int>(states.size()); }
  int state_index(int queue, int cls) const;  // -1 if absent
};

// Builds the routing chain induced by a policy:
//   - at a station, a departing vehicle of class k enters road j with
//     alpha[k][station][j];
//   - on a road whose head is not the class destination, it continues per
//     alpha[k][road][j];
//   - on a road whose head hosts the class destination station, it is
//     absorbed into that station and switches class with p_tilde.
// Validates coverage (every reachable decision state has a distribution),
// support (only roads leaving the decision vertex), stochasticity, and
// irreducibility of the reachable chain.
RoutingMatrix assemble_routing_matrix(const AmodNetwork& network, const RoutingPolicy& policy);

}  // namespace amod
