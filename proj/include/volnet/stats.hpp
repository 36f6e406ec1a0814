#pragma once

#include <vector>

namespace volnet {

// Regularized incomplete beta function I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student-t with nu degrees of freedom.
double student_t_cdf(double t, double nu);

// Two-sided p-value under Student-t(nu).
double student_t_two_sided_p(double t, double nu);

// Type-7 (linear interpolation) sample quantile; sorts a copy.
double quantile(std::vector<double> values, double p);

// k-th smallest with k = floor(q*n) clamped to [1, n]; the tie rule used for
// regime thresholds (values <= threshold fall in the lower stratum).
double order_statistic_quantile(std::vector<double> values, double q);

double mean(const std::vector<double>& values);
double variance(const std::vector<double>& values);  // denominator n

}  // namespace volnet
