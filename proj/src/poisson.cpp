#include "amod/poisson.hpp"

#include <cmath>
#include <vector>

#include "amod/common.hpp"

namespace amod {

double poisson_log_pmf(long long x, double mean) {
  if (x < 0) return -INFINITY;
  if (mean < 0 || !std::isfinite(mean)) throw ValidationError("poisson mean must be finite and >= 0");
  if (mean == 0) return x == 0 ? 0.0 : -INFINITY;
  return -mean + static_cast<double>(x) * std::log(mean) - std::lgamma(static_cast<double>(x) + 1.0);
}

double poisson_pmf(long long x, double mean) { return std::exp(poisson_log_pmf(x, mean)); }

double poisson_cdf(long long x, double mean) {
  if (x < 0) return 0.0;
  if (mean < 0 || !std::isfinite(mean)) throw ValidationError("poisson mean must be finite and >= 0");
  if (mean == 0) return 1.0;
  // Kahan-summed term recurrence in log space; each term is computed from
  // lgamma so the sum stays accurate even when exp(-mean) underflows.
  double sum = 0.0, comp = 0.0;
  for (long long k = 0; k <= x; ++k) {
    double t = std::exp(poisson_log_pmf(k, mean));
    double y = t - comp;
    double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum < 1.0 ? sum : 1.0;
}

double poisson_tail(long long x, double mean) {
  double cdf = poisson_cdf(x, mean);
  if (cdf < 0.5) return 1.0 - cdf;
  // Sum the upper tail directly to keep relative accuracy when cdf ~ 1.
  double sum = 0.0, comp = 0.0;
  long long k = x + 1;
  double t = std::exp(poisson_log_pmf(k, mean));
  while (true) {
    double y = t - comp;
    double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
    ++k;
    t *= mean / static_cast<double>(k);
    if (t < sum * 1e-18 + 1e-320) break;
  }
  return sum;
}

namespace {

// Stirling numbers of the second kind S(n, j), n <= order.
std::vector<std::vector<double>> stirling2(int order) {
  std::vector<std::vector<double>> s(order + 1, std::vector<double>(order + 1, 0.0));
  s[0][0] = 1.0;
  for (int n = 1; n <= order; ++n)
    for (int j = 1; j <= n; ++j) s[n][j] = static_cast<double>(j) * s[n - 1][j] + s[n - 1][j - 1];
  return s;
}

}  // namespace

double poisson_raw_moment(double order, double mean) {
  if (order < 0) throw ValidationError("moment order must be >= 0");
  if (mean < 0) throw ValidationError("poisson mean must be >= 0");
  if (order == 0) return 1.0;
  if (mean == 0) return 0.0;
  double rounded = std::round(order);
  if (std::abs(order - rounded) < 1e-12 && rounded <= 12) {
    // E[X^n] = sum_j S(n, j) mean^j (falling-factorial moments of Poisson).
    int n = static_cast<int>(rounded);
    auto s = stirling2(n);
    double acc = 0.0, pw = 1.0;
    for (int j = 1; j <= n; ++j) {
      pw *= mean;
      acc += s[n][j] * pw;
    }
    return acc;
  }
  // Fractional order: direct summation, truncated once the remaining
  // probability mass drops below 1e-12 (and past the mode).
  double acc = 0.0, cdf = 0.0;
  double p = std::exp(-mean);
  long long x = 0;
  while (true) {
    if (p > 0) acc += std::pow(static_cast<double>(x), order) * p;
    cdf += p;
    ++x;
    p *= mean / static_cast<double>(x);
    if (cdf > 1.0 - 1e-12 && static_cast<double>(x) > mean) break;
    if (x > 100000000) throw NumericError("poisson moment summation failed to converge");
  }
  return acc;
}

double capacity_quantile(double capacity, double epsilon) {
  if (!(capacity >= 0) || !std::isfinite(capacity)) throw ValidationError("capacity must be finite and >= 0");
  if (!(epsilon > 0 && epsilon < 1)) throw ValidationError("epsilon must lie in (0, 1)");
  long long floor_c = static_cast<long long>(std::floor(capacity));
  double target = 1.0 - epsilon;
  // cdf(floor_c; mean) is strictly decreasing in mean, from 1 at mean=0 to 0.
  double lo = 0.0, hi = 4.0 * capacity + 50.0;
  while (poisson_cdf(floor_c, hi) >= target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (poisson_cdf(floor_c, mid) >= target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace amod
