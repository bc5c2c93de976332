#pragma once
// Poisson distribution helpers: stable pmf/cdf, raw moments, and the
// mean-for-quantile inversion used by conservative capacity adjustment.

namespace amod {

// log P(X = x) for X ~ Poisson(mean); mean >= 0, x >= 0.
double poisson_log_pmf(long long x, double mean);

double poisson_pmf(long long x, double mean);

// P(X <= x); returns 1 for x >= 0 when mean == 0, 0 for x < 0.
double poisson_cdf(long long x, double mean);

// P(X > x) = 1 - cdf, with the tail summed directly when cdf is close to 1.
double poisson_tail(long long x, double mean);

// E[X^order] for X ~ Poisson(mean). Integer orders up to 12 use the exact
// Stirling-number expansion (E[X^3] = m^3 + 3m^2 + m, ...); fractional orders
// fall back to summation truncated at tail mass < 1e-12.
double poisson_raw_moment(double order, double mean);

// Largest Poisson mean c_hat with P(X <= floor(capacity)) >= 1 - epsilon,
// i.e. the root of cdf(floor(C); c_hat) = 1 - epsilon. Bisection in log-space
// CDF; residual below 1e-12. Requires capacity >= 0 and epsilon in (0, 1).
double capacity_quantile(double capacity, double epsilon);

}  // namespace amod
