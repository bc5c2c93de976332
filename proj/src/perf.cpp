#include "amod/perf.hpp"

#include <algorithm>
#include <cmath>

#include "amod/poisson.hpp"

namespace amod {

namespace {

constexpr double kRescaleThreshold = 0x1.0p512;

double gamma_of(const QueueModel& q) {
  if (!(q.service_rate > 0) || !std::isfinite(q.service_rate))
    throw ValidationError("queue service rate must be finite and > 0");
  if (!(q.visits >= 0) || !std::isfinite(q.visits)) throw ValidationError("queue visits must be finite and >= 0");
  return q.visits / q.service_rate;
}

// Shift mantissas back into [2^-512, 2^512] when they drift, tracking the
// shared exponent.
void rescale(std::vector<double>& g, long long& exp2) {
  double mx = 0.0;
  for (double v : g) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return;
  if (mx > kRescaleThreshold || mx < 1.0 / kRescaleThreshold) {
    int e = 0;
    std::frexp(mx, &e);
    exp2 += e;
    double f = std::ldexp(1.0, -e);
    for (double& v : g) v *= f;
    if (exp2 > (1LL << 56) || exp2 < -(1LL << 56))
      throw NumericError("normalization constant overflow (scale exponent " + std::to_string(exp2) + ")");
  }
}

}  // namespace

double GSeries::log_value(int n) const {
  double v = mantissa.at(n);
  if (!(v > 0)) throw NumericError("normalization constant is not positive");
  return std::log(v) + static_cast<double>(exponent2) * std::log(2.0);
}

GSeries convolution_g(const std::vector<QueueModel>& queues, int m, int skip) {
  if (queues.empty()) throw ValidationError("convolution needs at least one queue");
  if (m < 0) throw ValidationError("population must be >= 0");
  GSeries gs;
  gs.mantissa.assign(m + 1, 0.0);
  gs.mantissa[0] = 1.0;
  // All IS queues merge into one Poisson-style factor exp-series of the
  // summed gamma; each SS queue then folds in via the ascending in-place
  // geometric recurrence g[n] += gamma * g[n-1].
  double is_gamma = 0.0;
  for (int i = 0; i < static_cast<int>(queues.size()); ++i)
    if (i != skip && queues[i].infinite_server) is_gamma += gamma_of(queues[i]);
  for (int n = 1; n <= m; ++n) {
    gs.mantissa[n] = gs.mantissa[n - 1] * is_gamma / static_cast<double>(n);
    rescale(gs.mantissa, gs.exponent2);
  }
  for (int i = 0; i < static_cast<int>(queues.size()); ++i) {
    if (i == skip || queues[i].infinite_server) continue;
    double g = gamma_of(queues[i]);
    // rescale inside the fold: the recurrence is linear, so shifting the
    // whole vector mid-pass commutes with the remaining updates
    for (int n = 1; n <= m; ++n) {
      gs.mantissa[n] += g * gs.mantissa[n - 1];
      if (std::abs(gs.mantissa[n]) > kRescaleThreshold) rescale(gs.mantissa, gs.exponent2);
    }
    rescale(gs.mantissa, gs.exponent2);
  }
  return gs;
}

MvaResult mva_run(const std::vector<QueueModel>& queues, int m) {
  if (queues.empty()) throw ValidationError("mva needs at least one queue");
  if (m < 1) throw ValidationError("mva needs a population of at least 1");
  int nq = static_cast<int>(queues.size());
  for (const auto& q : queues) gamma_of(q);  // validate
  MvaResult res;
  res.queue_length.assign(nq, 0.0);
  res.waiting_time.assign(nq, 0.0);
  res.throughput_series.reserve(m);
  double prev_x = 0.0;
  for (int n = 1; n <= m; ++n) {
    double denom = 0.0;
    for (int i = 0; i < nq; ++i) {
      res.waiting_time[i] = queues[i].infinite_server ? 1.0 / queues[i].service_rate
                                                      : (1.0 + res.queue_length[i]) / queues[i].service_rate;
      denom += queues[i].visits * res.waiting_time[i];
    }
    if (!(denom > 0)) throw NumericError("mva encountered a zero total demand");
    double x = static_cast<double>(n) / denom;
    if (x + 1e-12 * (1.0 + x) < prev_x)
      throw NumericError("mva throughput decreased between populations; inputs are inconsistent");
    prev_x = x;
    res.throughput_series.push_back(x);
    for (int i = 0; i < nq; ++i) res.queue_length[i] = x * queues[i].visits * res.waiting_time[i];
  }
  return res;
}

std::vector<double> marginal_distribution(const std::vector<QueueModel>& queues, int queue, int m) {
  if (queue < 0 || queue >= static_cast<int>(queues.size())) throw ValidationError("marginal: no such queue");
  if (m < 0) throw ValidationError("population must be >= 0");
  if (m == 0) return {1.0};
  GSeries g_all = convolution_g(queues, m);
  GSeries g_rest = convolution_g(queues, m, queue);
  double gamma = gamma_of(queues[queue]);
  double log_g = g_all.log_value(m);
  std::vector<double> pmf(m + 1, 0.0);
  double log_w = 0.0;  // log weight of x vehicles at `queue`
  for (int x = 0; x <= m; ++x) {
    if (x > 0) {
      if (gamma <= 0) break;  // zero-visit queue: point mass at 0
      log_w += std::log(gamma);
      if (queues[queue].infinite_server) log_w -= std::log(static_cast<double>(x));
    }
    // a zero complement constant means the rest of the network cannot hold
    // m - x vehicles (e.g. the complement of a single-queue network)
    pmf[x] = g_rest.mantissa[m - x] > 0 ? std::exp(log_w + g_rest.log_value(m - x) - log_g) : 0.0;
  }
  double sum = 0.0;
  for (double p : pmf) sum += p;
  if (std::abs(sum - 1.0) > 1e-9)
    throw NumericError("marginal distribution failed to normalize (sum " + std::to_string(sum) + ")");
  return pmf;
}

StateSpaceOracle brute_force_stationary(const std::vector<QueueModel>& queues, int m) {
  int nq = static_cast<int>(queues.size());
  if (nq < 1 || nq > 8 || m < 0 || m > 10) throw ValidationError("state enumeration guard: need <= 8 queues, m <= 10");
  double states = 1.0;
  for (int i = 1; i < nq; ++i) states = states * (m + i) / i;
  if (states > 1e6) throw ValidationError("state enumeration guard: more than 1e6 states");

  std::vector<double> gamma(nq);
  for (int i = 0; i < nq; ++i) gamma[i] = gamma_of(queues[i]);

  StateSpaceOracle oracle;
  oracle.mean_count.assign(nq, 0.0);
  oracle.marginal.assign(nq, std::vector<double>(m + 1, 0.0));
  oracle.availability.assign(nq, 0.0);
  oracle.throughput.assign(nq, 0.0);

  // Weight of x vehicles at queue i: gamma^x (SS) or gamma^x / x! (IS).
  auto weight = [&](int i, int x) {
    double w = 1.0;
    for (int j = 1; j <= x; ++j) {
      w *= gamma[i];
      if (queues[i].infinite_server) w /= static_cast<double>(j);
    }
    return w;
  };

  double g_m = 0.0, g_m1 = 0.0;
  std::vector<int> x(nq, 0);
  // Recursive enumeration of all splits of `left` vehicles over queues i..N.
  auto enumerate = [&](auto&& self, int i, int left, double w, bool tally) -> void {
    if (i == nq - 1) {
      double full = w * weight(i, left);
      x[i] = left;
      if (tally) {
        g_m += full;
        for (int q = 0; q < nq; ++q) {
          oracle.mean_count[q] += x[q] * full;
          oracle.marginal[q][x[q]] += full;
        }
      } else {
        g_m1 += full;
      }
      return;
    }
    for (int v = 0; v <= left; ++v) {
      x[i] = v;
      self(self, i + 1, left - v, w * weight(i, v), tally);
    }
  };
  enumerate(enumerate, 0, m, 1.0, true);
  if (m >= 1) enumerate(enumerate, 0, m - 1, 1.0, false);
  if (!(g_m > 0)) throw NumericError("state enumeration produced a non-positive normalization constant");

  oracle.g = g_m;
  oracle.g_prev = m >= 1 ? g_m1 : 0.0;
  for (int q = 0; q < nq; ++q) {
    oracle.mean_count[q] /= g_m;
    for (double& p : oracle.marginal[q]) p /= g_m;
    oracle.availability[q] = 1.0 - oracle.marginal[q][0];
    oracle.throughput[q] = m >= 1 ? queues[q].visits * g_m1 / g_m : 0.0;
  }
  return oracle;
}

namespace {

std::vector<QueueModel> models_from(const AmodNetwork& net, const NetworkSolution& sol) {
  if (static_cast<int>(sol.queue_throughput.size()) != net.num_queues())
    throw ValidationError("solution does not match network dimensions");
  std::vector<QueueModel> models(net.num_queues());
  for (int q = 0; q < net.num_queues(); ++q) {
    if (q < net.num_stations())
      models[q] = {false, net.station_rate(q), sol.queue_throughput[q]};
    else
      models[q] = {true, 1.0 / net.queue(q).travel_time, sol.queue_throughput[q]};
  }
  return models;
}

}  // namespace

PerformanceReport analyze_fleet(const AmodNetwork& net, const NetworkSolution& sol, int m,
                                const std::vector<int>& marginal_queues) {
  PerformanceReport rep;
  rep.fleet = m;
  if (m == 0) return rep;
  if (m < 0) throw ValidationError("fleet size must be >= 0");
  auto models = models_from(net, sol);
  MvaResult mva = mva_run(models, m);
  int nq = net.num_queues(), nk = net.num_classes();
  double x_m = mva.throughput_series.back();
  rep.g_ratio = x_m;  // first-station throughput over its visit rate
  rep.throughput_series = mva.throughput_series;
  rep.throughput.assign(nq, 0.0);
  rep.mean_count = mva.queue_length;
  rep.waiting_time = mva.waiting_time;
  rep.availability.assign(net.num_stations(), 0.0);
  rep.class_throughput.assign(static_cast<size_t>(nq) * nk, 0.0);
  rep.class_mean.assign(static_cast<size_t>(nq) * nk, 0.0);
  for (int q = 0; q < nq; ++q) {
    rep.throughput[q] = x_m * sol.queue_throughput[q];
    // Per-class splits scale with the class share of the queue's visits.
    if (sol.queue_throughput[q] > 0) {
      for (int k = 0; k < nk; ++k) {
        double share = sol.pi(q, k, nk) / sol.queue_throughput[q];
        rep.class_throughput[static_cast<size_t>(q) * nk + k] = share * rep.throughput[q];
        rep.class_mean[static_cast<size_t>(q) * nk + k] = share * rep.mean_count[q];
      }
    }
  }
  for (int s = 0; s < net.num_stations(); ++s) rep.availability[s] = sol.relative_utilization[s] * x_m;
  for (int q : marginal_queues) rep.marginals[q] = marginal_distribution(models, q, m);
  return rep;
}

double LimitingLaw::pmf(int x) const {
  if (x < 0) return 0.0;
  if (kind == Kind::Geometric) return (1.0 - param) * std::pow(param, x);
  return poisson_pmf(x, param);
}

AsymptoticReport asymptotic_metrics(const AmodNetwork& net, const UtilizationProfile& profile) {
  if (profile.bottlenecks.empty()) throw ValidationError("utilization profile has no bottleneck");
  AsymptoticReport rep;
  rep.bottlenecks = profile.bottlenecks;
  rep.rho = profile.rho;
  rep.availability.assign(net.num_stations(), 0.0);
  for (int s = 0; s < net.num_stations(); ++s) rep.availability[s] = std::min(1.0, profile.rho[s]);
  return rep;
}

LimitingLaw limiting_law(const AmodNetwork& net, const AsymptoticReport& rep, int queue) {
  if (queue < 0 || queue >= net.num_queues()) throw ValidationError("limiting law: no such queue");
  if (queue < net.num_stations()) {
    for (int b : rep.bottlenecks)
      if (b == queue)
        throw ValidationError("station " + net.queue(queue).id +
                              " is a bottleneck; its queue length diverges and has no limiting law");
    return {LimitingLaw::Kind::Geometric, rep.rho[queue]};
  }
  return {LimitingLaw::Kind::Poisson, rep.rho[queue]};
}

double bpr_time(double travel_time, double vehicles, double capacity, double delta, double beta) {
  if (!(travel_time > 0) || !(capacity > 0)) throw ValidationError("bpr needs travel_time > 0 and capacity > 0");
  if (vehicles < 0) throw ValidationError("bpr needs vehicles >= 0");
  if (delta < 0 || beta < 0) throw ValidationError("bpr needs delta >= 0 and beta >= 0");
  return travel_time * (1.0 + delta * std::pow(vehicles / capacity, beta));
}

std::vector<OdDeviation> expected_bpr_deviation(const AmodNetwork& net, const std::vector<double>& class_road_flow,
                                                const std::vector<double>& road_mean_load, double delta,
                                                double beta) {
  int nr = net.num_roads(), nk = net.num_classes();
  if (static_cast<int>(class_road_flow.size()) != nk * nr || static_cast<int>(road_mean_load.size()) != nr)
    throw ValidationError("bpr deviation: flow/load dimensions do not match the network");
  // Expected congested time per road with Poisson(load) occupancy:
  // E[T'] = T (1 + delta E[X^beta] / C^beta).
  std::vector<double> expected_time(nr);
  for (int r = 0; r < nr; ++r) {
    const Queue& q = net.queue(net.num_stations() + r);
    if (!(road_mean_load[r] >= 0)) throw ValidationError("bpr deviation: loads must be >= 0");
    double moment = poisson_raw_moment(beta, road_mean_load[r]);
    expected_time[r] = q.travel_time * (1.0 + delta * moment / std::pow(q.capacity, beta));
  }
  std::vector<OdDeviation> out;
  for (int k = 0; k < nk; ++k) {
    double nominal = 0.0, adjusted = 0.0;
    // The class rate equals its flow divergence at the origin vertex, so the
    // per-trip route times below are self-contained in the flow matrix.
    double rate = 0.0;
    int origin_vertex = net.queue(net.classes()[k].origin).parent;
    for (int r = 0; r < nr; ++r) {
      double f = class_road_flow[static_cast<size_t>(k) * nr + r];
      if (f == 0) continue;
      const Queue& q = net.queue(net.num_stations() + r);
      nominal += f * q.travel_time;
      adjusted += f * expected_time[r];
      if (q.parent == origin_vertex) rate += f;
      if (q.child == origin_vertex) rate -= f;
    }
    if (!(rate > 1e-12) || !(nominal > 0)) continue;  // class carries no flow
    out.push_back({k, nominal / rate, adjusted / rate, (adjusted - nominal) / nominal});
  }
  return out;
}

}  // namespace amod
