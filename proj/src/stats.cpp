#include "geosmooth/stats.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "geosmooth/errors.hpp"

namespace geosmooth {

namespace {

void check_counts(int k, int n, double alpha) {
  if (n < 1 || k < 0 || k > n) {
    throw DomainError("binomial bound: need 0 <= k <= n and n >= 1, got k=" + std::to_string(k) +
                      " n=" + std::to_string(n));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("binomial bound: alpha must be in (0, 1)");
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) throw DomainError("normal_quantile: p outside [0, 1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double clopper_pearson_lower(int k, int n, double alpha) {
  check_counts(k, n, alpha);
  if (k == 0) return 0.0;
  return boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), alpha);
}

double clopper_pearson_upper(int k, int n, double alpha) {
  check_counts(k, n, alpha);
  if (k == n) return 1.0;
  return boost::math::ibeta_inv(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - alpha);
}

double binomial_test_half(int k, int n) {
  if (n < 1 || k < 0 || k > n) throw DomainError("binomial_test_half: need 0 <= k <= n and n >= 1");
  const boost::math::binomial_distribution<double> dist(n, 0.5);
  const int m = std::min(k, n - k);
  const double tail = boost::math::cdf(dist, static_cast<double>(m));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace geosmooth
