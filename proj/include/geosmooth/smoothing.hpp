#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "geosmooth/classifier.hpp"
#include "geosmooth/image.hpp"

namespace geosmooth {

inline constexpr int kAbstain = -1;

/// Maps per-sample seeds to labels (kAbstain allowed). A label must depend on
/// its seed only, never on batch composition or evaluation order.
using SeedLabeler = std::function<std::vector<int>(std::span<const std::uint64_t>)>;

struct SamplingOptions {
  int batch_size = 64;
  int threads = 1;
};

/// Draws n seeds from one generator, so sample i gets the same seed for any thread count.
std::vector<std::uint64_t> draw_seeds(std::uint64_t seed, int n);
/// Labels all seeds in fixed-size chunks spread over the workers.
std::vector<int> label_seeds(const SeedLabeler& labeler, std::span<const std::uint64_t> seeds,
                             const SamplingOptions& opts = {});
/// Per-class counts; kAbstain labels are not counted.
std::vector<int> count_labels(std::span<const int> labels, int num_classes);

struct SmoothedResult {
  int prediction = kAbstain;
  int candidate = kAbstain;
  double p_A_lower = 0.0;
  int count = 0;
  int n = 0;
};

/// Two-phase Monte Carlo: n0 samples pick the candidate class, n fresh samples
/// bound its probability from below at level 1 - alpha. Abstains when the bound is <= 1/2.
SmoothedResult smooth_predict_certify(const SeedLabeler& labeler, int num_classes, int n0, int n, double alpha,
                                      std::uint64_t seed, const SamplingOptions& opts = {});

/// Prediction only: top class if a two-sided binomial test against the
/// runner-up rejects at alpha, else kAbstain.
int smooth_predict(const SeedLabeler& labeler, int num_classes, int n, double alpha, std::uint64_t seed,
                   const SamplingOptions& opts = {});

/// sigma / 2 * (Phi^-1(p_A) - Phi^-1(p_B)). May be <= 0.
double radius_l2(double p_A_lower, double p_B_upper, double sigma);
/// sigma / 2 * (Phi^-1(p_A - rho) - Phi^-1(p_B + rho)); -inf when p_A - rho <= 0 or p_B + rho >= 1.
double radius_param(double p_A_lower, double p_B_upper, double sigma, double rho);
/// Bound on sqrt(g^T Sigma^-1 g) for smoothing with N(0, Sigma):
/// (Phi^-1(p_A - rho) - Phi^-1(p_B + rho)) / 2.
double radius_mahalanobis(double p_A_lower, double p_B_upper, double rho);
/// sqrt(sum g_d^2 / var_d) <= radius.
bool ellipsoid_contains(std::span<const double> gamma, std::span<const double> variances, double radius);

/// Gaussian noise with standard deviation sigma on every pixel.
Image add_pixel_noise(const Image& z, double sigma, std::uint64_t seed);

struct L2Result {
  int prediction = kAbstain;
  double radius = 0.0;
  double p_A_lower = 0.0;
};

/// Smoothing of `base` under N(0, sigma^2) pixel noise; radius is the certified l2 radius.
L2Result certify_l2_robust(const Image& z, const Classifier& base, double sigma, int n0, int n, double alpha,
                           std::uint64_t seed, const SamplingOptions& opts = {});

}  // namespace geosmooth
