#pragma once
// Relative-throughput (traffic) equations over the routing chain, the folding
// identity check, and the utilization profile / bottleneck set.

#include <optional>
#include <vector>

#include "amod/network.hpp"

namespace amod {

struct NetworkSolution {
  RoutingMatrix matrix;
  std::vector<double> state_throughput;  // pi over matrix states
  std::vector<double> queue_throughput;  // pi_i per queue (0 when unused)
  std::vector<double> class_throughput;  // pi_{i,k}, num_queues x num_classes row-major
  std::vector<double> relative_utilization;  // gamma_i: stations pi/lambda_tilde, roads T*pi
  double normalization = 0.0;  // pinned value of pi at the first station
  double residual = 0.0;       // max fixed-point defect relative to max pi

  double pi(int queue, int cls, int num_classes) const {
    return class_throughput[static_cast<size_t>(queue) * num_classes + cls];
  }
};

// Solves pi = pi P with the scale fixed by pi(first station) = c. Default c
// is that station's total departure rate lambda_tilde_1, which makes every
// station's pi equal lambda_tilde when the policy balances the network.
// Sparse LU with a damped power-iteration fallback; residual must reach 1e-9.
NetworkSolution solve_traffic_equations(const AmodNetwork& network, const RoutingMatrix& matrix,
                                        std::optional<double> normalization = std::nullopt);

// Folding identity: station throughput equals the switch-weighted sum of the
// origin-station throughputs of the classes it terminates,
//   pi_i = sum_{k in D_i} (rate_k / lambda_tilde_{s_k}) pi_{s_k}.
// Returns the max absolute defect relative to max station pi.
double fold_check(const AmodNetwork& network, const NetworkSolution& solution);

struct UtilizationProfile {
  std::vector<double> rho;      // per queue: gamma_i / max station gamma
  std::vector<int> bottlenecks; // station queue indices attaining the max
  double max_station_gamma = 0.0;
};

UtilizationProfile utilization_profile(const AmodNetwork& network, const NetworkSolution& solution);

}  // namespace amod
