#include "metagam/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "metagam/errors.hpp"

namespace metagam::stats {

namespace bm = boost::math;

double norm_cdf(double z) {
  if (std::isinf(z)) return z > 0 ? 1.0 : 0.0;
  return bm::cdf(bm::normal_distribution<double>(), z);
}

double norm_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return bm::quantile(bm::normal_distribution<double>(), p);
}

double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return bm::cdf(bm::complement(bm::chi_squared_distribution<double>(df), x));
}

double student_t_sf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  return bm::cdf(bm::complement(bm::students_t_distribution<double>(df), t));
}

double irwin_hall_cdf(double s, int m) {
  if (m < 1) throw InvalidSpec("irwin_hall_cdf requires m >= 1");
  if (s <= 0.0) return 0.0;
  if (s >= static_cast<double>(m)) return 1.0;
  if (m > 12) {
    // moments of sum of m uniforms: mean m/2, variance m/12
    return norm_cdf((s - m / 2.0) / std::sqrt(m / 12.0));
  }
  // The alternating sum loses precision for s near m; fold onto [0, m/2]
  // using the symmetry of the density about m/2.
  bool flipped = s > m / 2.0;
  if (flipped) s = static_cast<double>(m) - s;
  double sum = 0.0;
  double binom = 1.0;  // C(m, j)
  double sign = 1.0;
  for (int j = 0; j <= static_cast<int>(std::floor(s)); ++j) {
    sum += sign * binom * std::pow(s - j, m);
    sign = -sign;
    binom *= static_cast<double>(m - j) / static_cast<double>(j + 1);
  }
  double mfact = 1.0;
  for (int j = 2; j <= m; ++j) mfact *= j;
  double cdf = sum / mfact;
  cdf = std::clamp(cdf, 0.0, 1.0);
  return flipped ? 1.0 - cdf : cdf;
}

double quantile_sorted(const double* sorted, std::size_t n, double prob) {
  if (n == 0) throw EmptyInput("quantile of empty sample");
  if (prob <= 0.0) return sorted[0];
  if (prob >= 1.0) return sorted[n - 1];
  double h = (static_cast<double>(n) - 1.0) * prob;
  auto lo = static_cast<std::size_t>(std::floor(h));
  double frac = h - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double ks_distance_uniform(const double* sample, std::size_t n) {
  if (n == 0) throw EmptyInput("KS distance of empty sample");
  std::vector<double> s(sample, sample + n);
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ecdf_hi = static_cast<double>(i + 1) / static_cast<double>(n);
    double ecdf_lo = static_cast<double>(i) / static_cast<double>(n);
    d = std::max(d, std::max(std::abs(ecdf_hi - s[i]), std::abs(s[i] - ecdf_lo)));
  }
  return d;
}

}  // namespace metagam::stats
