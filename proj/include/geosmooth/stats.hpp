#pragma once

namespace geosmooth {

double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1); -inf / +inf at 0 / 1.
double normal_quantile(double p);

/// One-sided lower confidence bound at level 1 - alpha for a binomial success
/// probability after k successes in n trials. 0 when k = 0.
double clopper_pearson_lower(int k, int n, double alpha);
/// One-sided upper bound; 1 when k = n.
double clopper_pearson_upper(int k, int n, double alpha);

/// Two-sided exact binomial test p-value for k successes in n trials with p = 0.5.
double binomial_test_half(int k, int n);

}  // namespace geosmooth
