#include "amod/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace amod {

namespace {

// Manual transforms over mt19937_64 for cross-platform bit determinism.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double uniform() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }           // [0, 1)
  double uniform_pos() { return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53; }  // (0, 1]
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  double normal() {
    double u1 = uniform_pos(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// two-sided 97.5% Student-t quantiles for df = 1..40; beyond that 1.96.
constexpr double kT975[41] = {0,      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                              2.201,  2.179,  2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080,
                              2.074,  2.069,  2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042, 2.040, 2.037,
                              2.035,  2.032,  2.030, 2.028, 2.026, 2.024, 2.023, 2.021};

double t975(int df) { return df <= 0 ? 0.0 : df <= 40 ? kT975[df] : 1.96; }

BatchStat batch_ci(const std::vector<double>& values) {
  int b = static_cast<int>(values.size());
  BatchStat st;
  for (double v : values) st.mean += v;
  st.mean /= b;
  if (b < 2) return st;
  double ss = 0.0;
  for (double v : values) ss += (v - st.mean) * (v - st.mean);
  double sd = std::sqrt(ss / (b - 1));
  st.half_width = t975(b - 1) * sd / std::sqrt(static_cast<double>(b));
  return st;
}

struct Event {
  double time;
  std::uint64_t seq;
  int type;   // 0 demand arrival, 1 road traversal done, 2 trace sample
  int queue;  // station (type 0) or road (type 1)
  int cls;    // trip class (type 1)
  bool operator>(const Event& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
};

// Samples the class a departing vehicle adopts at station s.
int pick_class(const AmodNetwork& net, const std::vector<std::vector<double>>& p_switch, int s, double u) {
  const auto& ks = net.origin_classes(s);
  double acc = 0.0;
  int last_positive = -1;
  for (size_t j = 0; j < ks.size(); ++j) {
    double p = p_switch[s][j];
    if (p <= 0) continue;
    last_positive = static_cast<int>(j);
    acc += p;
    if (u < acc) return ks[j];
  }
  return ks[last_positive];
}

}  // namespace

SimReport simulate(const AmodNetwork& net, const RoutingPolicy& policy, const SimConfig& cfg) {
  if (cfg.fleet < 1) throw ValidationError("simulation needs at least one vehicle");
  if (!(cfg.horizon > 0)) throw ValidationError("simulation horizon must be > 0");
  if (cfg.batches < 2) throw ValidationError("simulation needs at least 2 batches");
  double warmup = cfg.warmup >= 0 ? cfg.warmup : cfg.horizon * 0.1;
  if (!(warmup < cfg.horizon)) throw ValidationError("warmup must end before the horizon");
  if (cfg.family == TravelTimeFamily::Lognormal && !(cfg.lognormal_sigma > 0))
    throw ValidationError("lognormal travel times need sigma > 0");
  for (int r : cfg.traced_roads)
    if (r < net.num_stations() || r >= net.num_queues())
      throw ValidationError("traced queue " + std::to_string(r) + " is not a road");

  // Policy coverage / stochasticity / irreducibility checks.
  assemble_routing_matrix(net, policy);
  auto p_switch = net.switch_probabilities();

  int ns = net.num_stations(), nq = net.num_queues();
  double batch_len = (cfg.horizon - warmup) / cfg.batches;
  Rng rng(cfg.seed);

  // Station idle counts and road occupancies in one array.
  std::vector<int> count(nq, 0);
  std::vector<int> road_reb(nq, 0);
  for (int v = 0; v < cfg.fleet; ++v) count[v % ns]++;

  // Per-queue integrals, per batch; plus squared-count integral over the
  // whole measurement window for the variance.
  std::vector<std::vector<double>> integral(nq, std::vector<double>(cfg.batches, 0.0));
  std::vector<double> integral_sq(nq, 0.0);
  std::vector<double> last_update(nq, 0.0);
  double reb_travel_integral = 0.0, travel_integral = 0.0, last_travel_update = 0.0;
  int traveling = 0, traveling_reb = 0;

  auto advance_queue = [&](int q, double now) {
    double lo = std::max(last_update[q], warmup);
    last_update[q] = now;
    if (now <= lo) return;
    double c = static_cast<double>(count[q]);
    integral_sq[q] += (now - lo) * c * c;
    while (lo < now) {
      int bi = std::min(cfg.batches - 1, static_cast<int>((lo - warmup) / batch_len));
      double hi = std::min(now, warmup + (bi + 1) * batch_len);
      integral[q][bi] += (hi - lo) * c;
      lo = hi;
    }
  };
  auto advance_travel = [&](double now) {
    double lo = std::max(last_travel_update, warmup);
    last_travel_update = now;
    if (now <= lo) return;
    travel_integral += (now - lo) * traveling;
    reb_travel_integral += (now - lo) * traveling_reb;
  };

  std::vector<std::vector<long long>> arrivals(ns, std::vector<long long>(cfg.batches, 0));
  std::vector<std::vector<long long>> served(ns, std::vector<long long>(cfg.batches, 0));
  long long trips_customer = 0, trips_reb = 0;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  std::vector<double> station_rate(ns);
  for (int s = 0; s < ns; ++s) {
    station_rate[s] = net.station_rate(s);
    events.push({rng.exponential(1.0 / station_rate[s]), seq++, 0, s, -1});
  }
  if (cfg.sample_interval > 0 && !cfg.traced_roads.empty())
    events.push({warmup, seq++, 2, -1, -1});

  SimReport rep;
  rep.trace_counts.resize(cfg.traced_roads.size());

  auto travel_sample = [&](int road) {
    double t = net.queue(road).travel_time;
    switch (cfg.family) {
      case TravelTimeFamily::Exponential:
        return rng.exponential(t);
      case TravelTimeFamily::Deterministic:
        return t;
      case TravelTimeFamily::Lognormal: {
        double sigma = cfg.lognormal_sigma;
        return std::exp(std::log(t) - 0.5 * sigma * sigma + sigma * rng.normal());
      }
    }
    return t;
  };

  auto pick = [&](const std::vector<std::pair<int, double>>& dist, double u) {
    double acc = 0.0;
    for (auto& [item, p] : dist) {
      acc += p;
      if (u < acc) return item;
    }
    return dist.back().first;
  };

  auto route_from = [&](int from_queue, int cls, int vertex) -> int {
    auto it = policy.alpha[cls].find(from_queue);
    if (it == policy.alpha[cls].end() || it->second.empty()) {
      const TripClass& c = net.classes()[cls];
      throw Error("policy gap reached at vertex " + std::to_string(net.vertex_ids()[vertex]) + " for class " +
                  net.queue(c.origin).id + "->" + net.queue(c.destination).id);
    }
    return pick(it->second, rng.uniform());
  };

  auto batch_of = [&](double t) { return std::min(cfg.batches - 1, static_cast<int>((t - warmup) / batch_len)); };

  while (!events.empty()) {
    Event ev = events.top();
    if (ev.time > cfg.horizon) break;
    events.pop();
    switch (ev.type) {
      case 0: {  // demand arrival at station ev.queue
        int s = ev.queue;
        events.push({ev.time + rng.exponential(1.0 / station_rate[s]), seq++, 0, s, -1});
        // class adopted by the served vehicle
        int ci = pick_class(net, p_switch, s, rng.uniform());
        if (ev.time >= warmup) arrivals[s][batch_of(ev.time)]++;
        if (count[s] > 0) {
          if (ev.time >= warmup) served[s][batch_of(ev.time)]++;
          advance_queue(s, ev.time);
          count[s]--;
          int road = route_from(s, ci, net.queue(s).parent);
          advance_queue(road, ev.time);
          advance_travel(ev.time);
          count[road]++;
          traveling++;
          bool reb = net.classes()[ci].kind == TripKind::Rebalancing;
          if (reb) {
            road_reb[road]++;
            traveling_reb++;
          }
          events.push({ev.time + travel_sample(road), seq++, 1, road, ci});
        }
        // no idle vehicle: the passenger leaves immediately
        break;
      }
      case 1: {  // vehicle finishes road ev.queue as class ev.cls
        int road = ev.queue, ci = ev.cls;
        const TripClass& c = net.classes()[ci];
        bool reb = c.kind == TripKind::Rebalancing;
        advance_queue(road, ev.time);
        count[road]--;
        if (reb) road_reb[road]--;
        int head = net.queue(road).child;
        if (net.station_at(head) == c.destination) {
          // trip complete: vehicle joins the destination station
          advance_travel(ev.time);
          traveling--;
          if (reb) traveling_reb--;
          advance_queue(c.destination, ev.time);
          count[c.destination]++;
          if (ev.time >= warmup) (reb ? trips_reb : trips_customer)++;
        } else {
          int next = route_from(road, ci, head);
          advance_queue(next, ev.time);
          count[next]++;
          if (reb) road_reb[next]++;
          events.push({ev.time + travel_sample(next), seq++, 1, next, ci});
        }
        break;
      }
      case 2: {  // trace sample
        rep.trace_times.push_back(ev.time);
        for (size_t i = 0; i < cfg.traced_roads.size(); ++i)
          rep.trace_counts[i].push_back(count[cfg.traced_roads[i]]);
        double next = ev.time + cfg.sample_interval;
        if (next <= cfg.horizon) events.push({next, seq++, 2, -1, -1});
        break;
      }
    }
  }
  for (int q = 0; q < nq; ++q) advance_queue(q, cfg.horizon);
  advance_travel(cfg.horizon);

  rep.fleet = cfg.fleet;
  rep.horizon = cfg.horizon;
  rep.warmup = warmup;
  rep.seed = cfg.seed;
  rep.family = cfg.family;
  rep.traced_roads = cfg.traced_roads;
  rep.arrivals.assign(ns, 0);
  rep.served.assign(ns, 0);
  rep.availability.resize(ns);
  for (int s = 0; s < ns; ++s) {
    std::vector<double> fractions(cfg.batches, 0.0);
    for (int b = 0; b < cfg.batches; ++b) {
      rep.arrivals[s] += arrivals[s][b];
      rep.served[s] += served[s][b];
      fractions[b] = arrivals[s][b] > 0 ? static_cast<double>(served[s][b]) / arrivals[s][b] : 0.0;
    }
    rep.availability[s] = batch_ci(fractions);
  }
  rep.occupancy.resize(nq);
  rep.occupancy_variance.assign(nq, 0.0);
  double window = cfg.horizon - warmup;
  std::vector<double> road_total(cfg.batches, 0.0);
  for (int q = 0; q < nq; ++q) {
    std::vector<double> means(cfg.batches, 0.0);
    double overall = 0.0;
    for (int b = 0; b < cfg.batches; ++b) {
      means[b] = integral[q][b] / batch_len;
      overall += integral[q][b];
      if (q >= ns) road_total[b] += means[b];
    }
    rep.occupancy[q] = batch_ci(means);
    overall /= window;
    rep.occupancy_variance[q] = std::max(0.0, integral_sq[q] / window - overall * overall);
  }
  rep.total_road_occupancy = batch_ci(road_total);
  rep.customer_trips = trips_customer;
  rep.rebalancing_trips = trips_reb;
  long long trips = trips_customer + trips_reb;
  rep.rebalancing_trip_share = trips > 0 ? static_cast<double>(trips_reb) / trips : 0.0;
  rep.rebalancing_travel_share = travel_integral > 0 ? reb_travel_integral / travel_integral : 0.0;
  return rep;
}

std::vector<double> occupancy_histogram(const SimReport& rep, int road_queue) {
  for (size_t i = 0; i < rep.traced_roads.size(); ++i) {
    if (rep.traced_roads[i] != road_queue) continue;
    const auto& counts = rep.trace_counts[i];
    if (counts.empty()) throw ValidationError("no trace samples recorded for the requested road");
    int mx = *std::max_element(counts.begin(), counts.end());
    std::vector<double> hist(mx + 1, 0.0);
    for (int c : counts) hist[c] += 1.0;
    for (double& h : hist) h /= static_cast<double>(counts.size());
    return hist;
  }
  throw ValidationError("road queue " + std::to_string(road_queue) + " was not traced");
}

}  // namespace amod
