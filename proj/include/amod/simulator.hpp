#pragma once
// Discrete-event simulation of the closed fleet under a routing policy:
// Poisson demand streams with passenger loss, class switching at stations,
// road traversal under exchangeable travel-time families, batch-means
// statistics with t-based confidence intervals, and optional occupancy
// traces.

#include <cstdint>
#include <vector>

#include "amod/network.hpp"

namespace amod {

enum class TravelTimeFamily { Exponential, Deterministic, Lognormal };

struct SimConfig {
  int fleet = 1;
  double horizon = 10000.0;  // total simulated time
  double warmup = -1.0;      // stats start here; < 0 means horizon / 10
  int batches = 20;
  std::uint64_t seed = 1;
  TravelTimeFamily family = TravelTimeFamily::Exponential;
  double lognormal_sigma = 0.5;    // shape when family == Lognormal
  double sample_interval = 0.0;    // > 0 records traces at this spacing
  std::vector<int> traced_roads;   // road queue indices to trace
};

struct BatchStat {
  double mean = 0.0;
  double half_width = 0.0;  // 95% CI half-width from batch means
};

struct SimReport {
  int fleet = 0;
  double horizon = 0.0, warmup = 0.0;
  std::uint64_t seed = 0;
  TravelTimeFamily family = TravelTimeFamily::Exponential;

  std::vector<long long> arrivals;  // per station, post-warmup demands
  std::vector<long long> served;    // per station, demands that found a vehicle
  std::vector<BatchStat> availability;     // per station: served fraction
  std::vector<BatchStat> occupancy;        // per queue: time-average count (roads and stations)
  std::vector<double> occupancy_variance;  // per queue: time-average variance
  BatchStat total_road_occupancy;          // summed over roads

  long long customer_trips = 0;     // completed post-warmup
  long long rebalancing_trips = 0;
  double rebalancing_trip_share = 0.0;    // of completed trips
  double rebalancing_travel_share = 0.0;  // time-average share of traveling vehicles

  std::vector<int> traced_roads;
  std::vector<double> trace_times;
  std::vector<std::vector<int>> trace_counts;  // per traced road, one count per time
};

// Runs the event loop. The policy must cover every positive-rate class
// (validated up front via the routing-matrix assembly).
SimReport simulate(const AmodNetwork& network, const RoutingPolicy& policy, const SimConfig& config);

// Normalized occupancy histogram of a traced road (counts over trace
// samples); throws if the road was not traced.
std::vector<double> occupancy_histogram(const SimReport& report, int road_queue);

}  // namespace amod
