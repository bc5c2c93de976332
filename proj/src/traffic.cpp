#include "amod/traffic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

namespace amod {

namespace {

double fixed_point_residual(const RoutingMatrix& matrix, const std::vector<double>& x) {
  int n = matrix.num_states();
  std::vector<double> px(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (auto [j, p] : matrix.rows[i]) px[j] += x[i] * p;
  double scale = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(x[i]));
  for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(px[i] - x[i]));
  return scale > 0 ? worst / scale : worst;
}

}  // namespace

NetworkSolution solve_traffic_equations(const AmodNetwork& net, const RoutingMatrix& matrix,
                                        std::optional<double> normalization) {
  int n = matrix.num_states();
  if (n == 0) throw ValidationError("routing matrix has no states");
  for (const auto& st : matrix.states)
    if (st.queue < 0 || st.queue >= net.num_queues() || st.cls < 0 || st.cls >= net.num_classes())
      throw ValidationError("routing matrix does not match network dimensions");

  double norm_value = normalization.value_or(net.station_rate(0));
  if (!(norm_value > 0) || !std::isfinite(norm_value))
    throw ValidationError("normalization constant must be finite and > 0");

  // Balance equations (P^T - I) x = 0 with one redundant equation replaced by
  // the normalization row  sum_{states of station 0} x = norm_value.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(n) * 4);
  for (int i = 0; i < n; ++i)
    for (auto [j, p] : matrix.rows[i])
      if (j != 0) trips.emplace_back(j, i, p);
  for (int i = 1; i < n; ++i) trips.emplace_back(i, i, -1.0);
  bool station0_present = false;
  for (int i = 0; i < n; ++i)
    if (matrix.states[i].queue == 0) {
      trips.emplace_back(0, i, 1.0);
      station0_present = true;
    }
  if (!station0_present) throw ValidationError("first station carries no routing states; cannot normalize");

  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b[0] = norm_value;

  std::vector<double> x(n, 0.0);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  bool solved = false;
  if (lu.info() == Eigen::Success) {
    Eigen::VectorXd sol = lu.solve(b);
    if (lu.info() == Eigen::Success) {
      for (int i = 0; i < n; ++i) x[i] = sol[i];
      solved = true;
    }
  }

  auto renormalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      if (matrix.states[i].queue == 0) s += v[i];
    if (!(s > 0)) throw NumericError("traffic solve lost the normalization mass");
    double f = norm_value / s;
    for (auto& vi : v) vi *= f;
  };

  if (!solved || fixed_point_residual(matrix, x) > 1e-9) {
    // Damped power iteration x <- x (P + I)/2 handles periodic chains and
    // doubles as a fallback when the factorization struggles.
    if (!solved) x.assign(n, 1.0);
    std::vector<double> next(n);
    for (int it = 0; it < 200000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        for (auto [j, p] : matrix.rows[i]) next[j] += 0.5 * p * x[i];
        next[i] += 0.5 * x[i];
      }
      x.swap(next);
      if ((it & 63) == 63) {
        renormalize(x);
        if (fixed_point_residual(matrix, x) <= 1e-10) break;
      }
    }
    renormalize(x);
  }

  double res = fixed_point_residual(matrix, x);
  if (res > 1e-9)
    throw NumericError("traffic equations failed to converge (residual " + std::to_string(res) + ")");

  NetworkSolution sol;
  sol.matrix = matrix;
  sol.normalization = norm_value;
  sol.residual = res;
  sol.state_throughput.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (x[i] < 0) {
      if (x[i] < -1e-9 * norm_value) throw NumericError("traffic solve produced a negative throughput");
      x[i] = 0.0;
    }
    sol.state_throughput[i] = x[i];
  }
  int nq = net.num_queues(), nk = net.num_classes();
  sol.queue_throughput.assign(nq, 0.0);
  sol.class_throughput.assign(static_cast<size_t>(nq) * nk, 0.0);
  for (int i = 0; i < n; ++i) {
    sol.queue_throughput[matrix.states[i].queue] += x[i];
    sol.class_throughput[static_cast<size_t>(matrix.states[i].queue) * nk + matrix.states[i].cls] += x[i];
  }
  sol.relative_utilization.assign(nq, 0.0);
  for (int q = 0; q < nq; ++q) {
    if (q < net.num_stations())
      sol.relative_utilization[q] = sol.queue_throughput[q] / net.station_rate(q);
    else
      sol.relative_utilization[q] = sol.queue_throughput[q] * net.queue(q).travel_time;
  }
  return sol;
}

double fold_check(const AmodNetwork& net, const NetworkSolution& sol) {
  double scale = 0.0;
  for (int s = 0; s < net.num_stations(); ++s) scale = std::max(scale, sol.queue_throughput[s]);
  if (!(scale > 0)) throw ValidationError("solution has no station throughput");
  double worst = 0.0;
  for (int s = 0; s < net.num_stations(); ++s) {
    double folded = 0.0;
    for (int k : net.destination_classes(s)) {
      const TripClass& c = net.classes()[k];
      if (c.rate <= 0) continue;
      folded += (c.rate / net.station_rate(c.origin)) * sol.queue_throughput[c.origin];
    }
    worst = std::max(worst, std::abs(folded - sol.queue_throughput[s]));
  }
  return worst / scale;
}

UtilizationProfile utilization_profile(const AmodNetwork& net, const NetworkSolution& sol) {
  UtilizationProfile prof;
  prof.max_station_gamma = 0.0;
  for (int s = 0; s < net.num_stations(); ++s)
    prof.max_station_gamma = std::max(prof.max_station_gamma, sol.relative_utilization[s]);
  if (!(prof.max_station_gamma > 0)) throw NumericError("all stations have zero utilization");
  prof.rho.assign(net.num_queues(), 0.0);
  for (int q = 0; q < net.num_queues(); ++q) prof.rho[q] = sol.relative_utilization[q] / prof.max_station_gamma;
  for (int s = 0; s < net.num_stations(); ++s)
    if (prof.rho[s] >= 1.0 - 1e-9) prof.bottlenecks.push_back(s);
  return prof;
}

}  // namespace amod
