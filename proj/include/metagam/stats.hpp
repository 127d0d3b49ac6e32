#pragma once

#include <cstddef>

namespace metagam::stats {

/// Standard normal CDF.
double norm_cdf(double z);

/// Standard normal quantile function.
double norm_quantile(double p);

/// Upper tail of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

/// Upper tail of Student's t distribution.
double student_t_sf(double t, double df);

/// CDF of the Irwin-Hall distribution (sum of m independent U(0,1)).
/// Exact alternating-sum formula for m <= 12, normal approximation beyond.
double irwin_hall_cdf(double s, int m);

/// Type-7 (linear interpolation) sample quantile of sorted values.
double quantile_sorted(const double* sorted, std::size_t n, double prob);

/// Kolmogorov-Smirnov distance between a sample and the U(0,1) CDF.
double ks_distance_uniform(const double* sample, std::size_t n);

}  // namespace metagam::stats
