#pragma once
// Exact steady-state analysis of the closed product-form network: Buzen
// convolution for normalization constants, MVA recursion, complement-
// convolution marginals, brute-force state enumeration (oracle), asymptotic
// laws, and BPR congestion post-processing.

#include <cstdint>
#include <map>
#include <vector>

#include "amod/network.hpp"
#include "amod/traffic.hpp"

namespace amod {

// Single-class compressed view of one queue: gamma_i = visits / service_rate.
struct QueueModel {
  bool infinite_server = false;  // false: single-server FCFS
  double service_rate = 1.0;     // mu (stations: lambda_tilde; roads: 1/T)
  double visits = 1.0;           // relative visit rate pi_i
};

// Normalization constants G(0..m) stored as mantissa * 2^exponent2 with one
// shared exponent so ratios of nearby values stay exact.
struct GSeries {
  std::vector<double> mantissa;
  long long exponent2 = 0;

  int max_population() const { return static_cast<int>(mantissa.size()) - 1; }
  double ratio(int a, int b) const { return mantissa.at(a) / mantissa.at(b); }
  double log_value(int n) const;  // natural log of G(n)
};

// Sequential convolution over queues; SS queues contribute geometric terms
// gamma^x, IS queues Poisson-style terms gamma^x/x!. `skip` excludes one
// queue (complement convolution), -1 keeps all.
GSeries convolution_g(const std::vector<QueueModel>& queues, int m, int skip = -1);

struct MvaResult {
  std::vector<double> throughput_series;  // X(1..m); X(m) = G(m-1)/G(m)
  std::vector<double> queue_length;       // L_i(m)
  std::vector<double> waiting_time;       // W_i(m)
};

// Exact MVA recursion for the mixed SS/IS closed network.
MvaResult mva_run(const std::vector<QueueModel>& queues, int m);

// P(x vehicles at queue i | population m), x = 0..m, via complement
// convolution; must sum to 1 within 1e-9.
std::vector<double> marginal_distribution(const std::vector<QueueModel>& queues, int queue, int m);

// Exhaustive product-form enumeration; the independent oracle for the above.
struct StateSpaceOracle {
  double g = 1.0;       // G(m)
  double g_prev = 0.0;  // G(m-1), 0 when m == 0
  std::vector<double> mean_count;
  std::vector<std::vector<double>> marginal;  // per queue, pmf over 0..m
  std::vector<double> availability;           // P(x_i >= 1)
  std::vector<double> throughput;             // visits * G(m-1)/G(m)
};
StateSpaceOracle brute_force_stationary(const std::vector<QueueModel>& queues, int m);

// Network-level report produced by MVA on a traffic solution.
struct PerformanceReport {
  int fleet = 0;
  double g_ratio = 0.0;                   // G(m-1)/G(m)
  std::vector<double> throughput;         // Lambda_i(m) per queue
  std::vector<double> mean_count;         // L_i(m) per queue
  std::vector<double> waiting_time;       // W_i(m) per queue
  std::vector<double> availability;       // per station: gamma_i G(m-1)/G(m)
  std::vector<double> throughput_series;  // G-ratio series over n = 1..m
  std::vector<double> class_throughput;   // num_queues x num_classes
  std::vector<double> class_mean;         // num_queues x num_classes
  std::map<int, std::vector<double>> marginals;  // queue -> pmf
};

// Runs MVA at fleet size m; `marginal_queues` selects queues whose marginal
// pmf is attached. m == 0 returns an empty report.
PerformanceReport analyze_fleet(const AmodNetwork& network, const NetworkSolution& solution, int m,
                                const std::vector<int>& marginal_queues = {});

// Limiting law of a non-bottleneck queue as the fleet grows.
struct LimitingLaw {
  enum class Kind { Geometric, Poisson } kind;
  double param;  // Geometric: rho (success ratio); Poisson: mean
  double pmf(int x) const;
};

struct AsymptoticReport {
  std::vector<int> bottlenecks;              // station queue indices
  std::vector<double> availability;          // per station: rho_i (1 on bottlenecks)
  std::vector<double> rho;                   // per queue, scaled by max station gamma
};

AsymptoticReport asymptotic_metrics(const AmodNetwork& network, const UtilizationProfile& profile);

// Limiting marginal law for one queue; throws for bottleneck queues (their
// population diverges).
LimitingLaw limiting_law(const AmodNetwork& network, const AsymptoticReport& report, int queue);

// Volume-delay curve T (1 + delta (x/C)^beta).
double bpr_time(double travel_time, double vehicles, double capacity, double delta, double beta);

// Expected congested travel time per road under a Poisson(load) occupancy,
// then aggregated per trip class along its flow splits.
struct OdDeviation {
  int cls;                // class index
  double nominal_time;    // free-flow expected route time
  double expected_time;   // BPR-adjusted expected route time
  double deviation;       // (expected - nominal) / nominal
};
std::vector<OdDeviation> expected_bpr_deviation(const AmodNetwork& network,
                                                const std::vector<double>& class_road_flow,  // K x NR row-major
                                                const std::vector<double>& road_mean_load,   // Lambda_i T_i per road
                                                double delta, double beta);

}  // namespace amod
