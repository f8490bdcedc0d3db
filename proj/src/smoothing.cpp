#include "geosmooth/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "geosmooth/errors.hpp"
#include "geosmooth/parallel.hpp"
#include "geosmooth/stats.hpp"

namespace geosmooth {

std::vector<std::uint64_t> draw_seeds(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out(std::max(n, 0));
  for (auto& s : out) s = rng();
  return out;
}

std::vector<int> label_seeds(const SeedLabeler& labeler, std::span<const std::uint64_t> seeds,
                             const SamplingOptions& opts) {
  const std::size_t bs = static_cast<std::size_t>(std::max(opts.batch_size, 1));
  const std::size_t chunks = (seeds.size() + bs - 1) / bs;
  std::vector<int> out(seeds.size(), kAbstain);
  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t begin = c * bs;
    const std::size_t len = std::min(bs, seeds.size() - begin);
    const auto labels = labeler(seeds.subspan(begin, len));
    if (labels.size() != len) throw DomainError("labeler returned the wrong number of labels");
    std::copy(labels.begin(), labels.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  });
  return out;
}

std::vector<int> count_labels(std::span<const int> labels, int num_classes) {
  std::vector<int> counts(num_classes, 0);
  for (int l : labels) {
    if (l == kAbstain) continue;
    if (l < 0 || l >= num_classes) throw DomainError("label " + std::to_string(l) + " out of range");
    ++counts[l];
  }
  return counts;
}

SmoothedResult smooth_predict_certify(const SeedLabeler& labeler, int num_classes, int n0, int n, double alpha,
                                      std::uint64_t seed, const SamplingOptions& opts) {
  if (n0 < 1 || n < 1) throw DomainError("smooth_predict_certify: n0 and n must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("smooth_predict_certify: alpha must be in (0, 1)");
  const auto seeds = draw_seeds(seed, n0 + n);
  const std::span<const std::uint64_t> all(seeds);

  SmoothedResult res;
  res.n = n;
  const auto c0 = count_labels(label_seeds(labeler, all.first(n0), opts), num_classes);
  const auto best = std::max_element(c0.begin(), c0.end());
  if (*best == 0) return res;
  res.candidate = static_cast<int>(best - c0.begin());

  const auto c1 = count_labels(label_seeds(labeler, all.subspan(n0), opts), num_classes);
  res.count = c1[res.candidate];
  res.p_A_lower = clopper_pearson_lower(res.count, n, alpha);
  if (res.p_A_lower > 0.5) res.prediction = res.candidate;
  return res;
}

int smooth_predict(const SeedLabeler& labeler, int num_classes, int n, double alpha, std::uint64_t seed,
                   const SamplingOptions& opts) {
  if (n < 1) throw DomainError("smooth_predict: n must be >= 1");
  const auto seeds = draw_seeds(seed, n);
  const auto counts = count_labels(label_seeds(labeler, seeds, opts), num_classes);
  std::vector<int> order(num_classes);
  for (int c = 0; c < num_classes; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  const int na = counts[order[0]];
  const int nb = num_classes > 1 ? counts[order[1]] : 0;
  if (na == 0) return kAbstain;
  return binomial_test_half(na, na + nb) > alpha ? kAbstain : order[0];
}

double radius_l2(double p_A_lower, double p_B_upper, double sigma) {
  return sigma / 2.0 * (normal_quantile(p_A_lower) - normal_quantile(p_B_upper));
}

double radius_mahalanobis(double p_A_lower, double p_B_upper, double rho) {
  const double a = p_A_lower - rho;
  const double b = p_B_upper + rho;
  if (a <= 0.0 || b >= 1.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * (normal_quantile(a) - normal_quantile(b));
}

double radius_param(double p_A_lower, double p_B_upper, double sigma, double rho) {
  return sigma * radius_mahalanobis(p_A_lower, p_B_upper, rho);
}

bool ellipsoid_contains(std::span<const double> gamma, std::span<const double> variances, double radius) {
  if (gamma.size() != variances.size()) throw DomainError("ellipsoid_contains: dimension mismatch");
  double s = 0.0;
  for (std::size_t d = 0; d < gamma.size(); ++d) {
    if (!(variances[d] > 0.0)) throw DomainError("ellipsoid_contains: variances must be positive");
    s += gamma[d] * gamma[d] / variances[d];
  }
  return std::sqrt(s) <= radius;
}

Image add_pixel_noise(const Image& z, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  Image out = z;
  for (double& v : out.data()) v += nd(rng);
  return out;
}

L2Result certify_l2_robust(const Image& z, const Classifier& base, double sigma, int n0, int n, double alpha,
                           std::uint64_t seed, const SamplingOptions& opts) {
  if (!(sigma > 0.0)) throw DomainError("certify_l2_robust: sigma must be positive");
  SamplingOptions o = opts;
  if (!base.reentrant()) o.threads = 1;
  const SeedLabeler labeler = [&](std::span<const std::uint64_t> seeds) {
    std::vector<Image> batch;
    batch.reserve(seeds.size());
    for (auto s : seeds) batch.push_back(add_pixel_noise(z, sigma, s));
    return base.classify_batch(batch);
  };
  const auto r = smooth_predict_certify(labeler, base.num_classes(), n0, n, alpha, seed, o);
  L2Result out;
  out.p_A_lower = r.p_A_lower;
  if (r.prediction == kAbstain) return out;
  out.prediction = r.prediction;
  out.radius = radius_l2(r.p_A_lower, 1.0 - r.p_A_lower, sigma);
  return out;
}

}  // namespace geosmooth
