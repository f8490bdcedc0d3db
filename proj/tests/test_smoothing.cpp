#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "geosmooth/errors.hpp"
#include "geosmooth/pipelines.hpp"
#include "geosmooth/smoothing.hpp"
#include "geosmooth/stats.hpp"
#include "oracles.hpp"

using namespace geosmooth;

namespace {

// Labels each seed 0 with probability p using the seed alone.
SeedLabeler bernoulli_labeler(double p) {
  return [p](std::span<const std::uint64_t> seeds) {
    std::vector<int> out;
    for (auto s : seeds) {
      std::mt19937_64 r(s);
      out.push_back(std::uniform_real_distribution<double>(0, 1)(r) < p ? 0 : 1);
    }
    return out;
  };
}

class ConstantClassifier : public Classifier {
 public:
  ConstantClassifier(GridGeometry g, int label) : g_(g), label_(label) {}
  int num_classes() const override { return 3; }
  GridGeometry input_geometry() const override { return g_; }
  std::vector<int> classify_batch(std::span<const Image> batch) const override {
    return std::vector<int>(batch.size(), label_);
  }

 private:
  GridGeometry g_;
  int label_;
};

// Linear two-class rule on the pixel sum: class 1 iff w.x > b, with w = 1 / sqrt(n).
class LinearClassifier : public Classifier {
 public:
  explicit LinearClassifier(GridGeometry g, double b) : g_(g), b_(b) {}
  int num_classes() const override { return 2; }
  GridGeometry input_geometry() const override { return g_; }
  std::vector<int> classify_batch(std::span<const Image> batch) const override {
    std::vector<int> out;
    for (const auto& x : batch) out.push_back(margin(x) > 0 ? 1 : 0);
    return out;
  }
  double margin(const Image& x) const {
    double s = 0;
    for (double v : x.data()) s += v;
    return s / std::sqrt(static_cast<double>(x.data().size())) - b_;
  }

 private:
  GridGeometry g_;
  double b_;
};

}  // namespace

TEST_CASE("normal quantile against erfc bisection") {
  for (double p : {1e-8, 1e-4, 0.01, 0.1, 0.3, 0.5, 0.7, 0.99, 0.999999}) {
    CHECK(std::abs(normal_quantile(p) - oracle::phi_inv(p)) < 1e-9);
    CHECK(std::abs(normal_cdf(oracle::phi_inv(p)) - p) < 1e-12);
  }
  CHECK(std::isinf(normal_quantile(0.0)));
  CHECK(std::isinf(normal_quantile(1.0)));
}

TEST_CASE("Clopper-Pearson lower bound") {
  CHECK(clopper_pearson_lower(0, 10, 0.05) == 0.0);
  CHECK(std::abs(clopper_pearson_lower(100, 100, 0.05) - std::pow(0.05, 0.01)) < 1e-9);
  for (int n : {1, 7, 500, 8000}) CHECK(std::abs(clopper_pearson_lower(n, n, 0.001) - std::pow(0.001, 1.0 / n)) < 1e-9);
  CHECK(std::abs(clopper_pearson_lower(150, 200, 0.002) - oracle::cp_lower(150, 200, 0.002)) < 1e-9);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 3000)(rng);
    const int k = std::uniform_int_distribution<int>(0, n)(rng);
    const double a = std::uniform_real_distribution<double>(1e-4, 0.3)(rng);
    CHECK(std::abs(clopper_pearson_lower(k, n, a) - oracle::cp_lower(k, n, a)) < 1e-9);
    CHECK(clopper_pearson_upper(k, n, a) >= static_cast<double>(k) / n);
  }
  CHECK_THROWS_AS(clopper_pearson_lower(1, 2, 0.0), DomainError);
  CHECK_THROWS_AS(clopper_pearson_lower(1, 2, 1.5), DomainError);
  CHECK_THROWS_AS(clopper_pearson_lower(3, 2, 0.1), DomainError);
  CHECK(clopper_pearson_upper(5, 5, 0.1) == 1.0);
}

TEST_CASE("binomial test") {
  CHECK(binomial_test_half(5, 10) == doctest::Approx(1.0));
  // P(X <= 1) + P(X >= 9) for Bin(10, 1/2) = 22/1024
  CHECK(binomial_test_half(1, 10) == doctest::Approx(22.0 / 1024));
  CHECK(binomial_test_half(9, 10) == doctest::Approx(22.0 / 1024));
}

TEST_CASE("radius formulas") {
  CHECK(radius_l2(0.7, 0.7, 0.5) == 0.0);
  const double expected = 0.15 * (oracle::phi_inv(0.99) - oracle::phi_inv(0.01));
  CHECK(std::abs(radius_l2(0.99, 0.01, 0.3) - expected) < 1e-6);
  CHECK(std::abs(radius_l2(0.99, 0.01, 0.3) - 0.697904) < 1e-6);
  CHECK(radius_l2(0.9, 0.1, 0.6) == doctest::Approx(2 * radius_l2(0.9, 0.1, 0.3)));
  for (double p : {0.55, 0.8, 0.999}) {
    CHECK(std::abs(radius_param(p, 1 - p, 30.0, 0.0) - radius_l2(p, 1 - p, 30.0)) <= 1e-12);
    CHECK(std::abs(30.0 * radius_mahalanobis(p, 1 - p, 0.0) - radius_l2(p, 1 - p, 30.0)) <= 1e-12);
  }
  CHECK(radius_param(0.6, 0.4, 1.0, 0.6) <= 0.0);
  CHECK(radius_param(0.6, 0.4, 1.0, 0.7) <= 0.0);
  CHECK(radius_param(0.9, 0.1, 1.0, 0.05) < radius_param(0.9, 0.1, 1.0, 0.0));
  const std::vector<double> g{3.0, 4.0}, var{9.0, 16.0};
  CHECK(ellipsoid_contains(g, var, std::sqrt(2.0)));
  CHECK_FALSE(ellipsoid_contains(g, var, 1.4));
}

TEST_CASE("smoothed prediction on synthetic labelers") {
  const auto constant = bernoulli_labeler(1.0);
  const auto r = smooth_predict_certify(constant, 2, 100, 500, 0.001, 7);
  CHECK(r.prediction == 0);
  CHECK(r.p_A_lower == doctest::Approx(clopper_pearson_lower(500, 500, 0.001)));

  const auto one = smooth_predict_certify(constant, 2, 1, 1, 0.1, 7);
  CHECK(one.prediction == kAbstain);

  int abstained = 0;
  const auto coin = bernoulli_labeler(0.5);
  for (int t = 0; t < 200; ++t) {
    if (smooth_predict_certify(coin, 2, 20, 200, 0.01, 1000 + t).prediction == kAbstain) ++abstained;
  }
  CHECK(abstained >= 196);
  CHECK_THROWS_AS(smooth_predict_certify(constant, 2, 0, 10, 0.1, 1), DomainError);
}

TEST_CASE("Clopper-Pearson coverage under simulation") {
  std::mt19937_64 rng(99);
  std::binomial_distribution<int> bin(500, 0.8);
  int over = 0;
  for (int t = 0; t < 10000; ++t) {
    if (clopper_pearson_lower(bin(rng), 500, 0.05) > 0.8) ++over;
  }
  CHECK(over <= static_cast<int>((0.05 + 0.01) * 10000));

  // The bound returned by the two-phase procedure on Bernoulli(p) labels.
  int fail = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto r = smooth_predict_certify(bernoulli_labeler(0.7), 2, 10, 100, 0.05, 5000 + t);
    if (r.candidate == 0 && r.p_A_lower > 0.7) ++fail;
  }
  CHECK(fail <= static_cast<int>(0.06 * 2000));
}

TEST_CASE("abstention is monotone in n and alpha") {
  const auto lab = bernoulli_labeler(0.75);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto big = smooth_predict_certify(lab, 2, 20, 400, 0.01, s);
    const auto small_alpha = smooth_predict_certify(lab, 2, 20, 400, 0.001, s);
    const double r1 = big.prediction == kAbstain ? 0 : radius_l2(big.p_A_lower, 1 - big.p_A_lower, 1);
    const double r2 = small_alpha.prediction == kAbstain ? 0 : radius_l2(small_alpha.p_A_lower, 1 - small_alpha.p_A_lower, 1);
    CHECK(r2 <= r1);
  }
}

TEST_CASE("labels do not depend on threads or batch size") {
  const auto lab = bernoulli_labeler(0.6);
  const auto seeds = draw_seeds(42, 1000);
  const auto a = label_seeds(lab, seeds, {64, 1});
  const auto b = label_seeds(lab, seeds, {7, 4});
  CHECK(a == b);
  CHECK(draw_seeds(42, 10) == std::vector<std::uint64_t>(seeds.begin(), seeds.begin() + 10));
  const std::vector<int> labels{0, 1, kAbstain, 1};
  CHECK(count_labels(labels, 2) == std::vector<int>{1, 2});
}

TEST_CASE("smooth_predict") {
  CHECK(smooth_predict(bernoulli_labeler(1.0), 2, 100, 0.01, 1) == 0);
  CHECK(smooth_predict(bernoulli_labeler(0.0), 2, 100, 0.01, 1) == 1);
  int abst = 0;
  for (int t = 0; t < 100; ++t) abst += smooth_predict(bernoulli_labeler(0.5), 2, 100, 0.01, t) == kAbstain;
  CHECK(abst >= 95);
}

TEST_CASE("l2 certificate never exceeds the true margin of a linear rule") {
  const GridGeometry g(4, 4);
  const LinearClassifier lin(g, 2.0);
  std::mt19937_64 rng(8);
  int certified = 0, violations = 0;
  for (int t = 0; t < 100; ++t) {
    Image x(g);
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : x.data()) v = u(rng);
    const auto r = certify_l2_robust(x, lin, 0.5, 20, 200, 0.01, 300 + t);
    if (r.prediction == kAbstain) continue;
    ++certified;
    const double true_radius = std::abs(lin.margin(x));
    if (r.prediction != (lin.margin(x) > 0 ? 1 : 0) || r.radius > true_radius) ++violations;
  }
  CHECK(certified > 20);
  CHECK(violations <= 2);
}

TEST_CASE("pixel noise is reproducible") {
  const Image z(GridGeometry(4, 4), 0.5);
  CHECK(add_pixel_noise(z, 0.3, 5) == add_pixel_noise(z, 0.3, 5));
  CHECK_FALSE(add_pixel_noise(z, 0.3, 5) == add_pixel_noise(z, 0.3, 6));
}

TEST_CASE("pipelines on a constant base classifier") {
  const GridGeometry g(6, 6);
  const Image x(g, 0.3);
  const ConstantClassifier base(g, 2);
  TransformSetup setup;
  setup.gamma = ParamBox::symmetric(TransformKind::rotation, 30.0);
  SmoothingConfig cfg;
  cfg.n_gamma = 100;
  cfg.n0_gamma = 20;
  cfg.n_delta = 50;
  cfg.n0_delta = 10;

  const Certificate b = basespt(x, base, setup, cfg, 1);
  CHECK(b.prediction == 2);
  CHECK(b.guarantee == Guarantee::heuristic);
  const double pa = clopper_pearson_lower(100, 100, cfg.alpha_gamma);
  CHECK(b.p_A_lower == doctest::Approx(pa));
  CHECK(b.radius_unclipped == doctest::Approx(radius_param(pa, 1 - pa, 30.0, 0.0)));

  ErrorBoundEstimate est;
  est.E = 0.1;
  est.alpha_E = 0.001;
  est.q_E_lower = 0.99;
  const Certificate d = distspt(x, base, setup, cfg, est, 1);
  CHECK(d.prediction == 2);
  CHECK(d.rho == doctest::Approx(cfg.alpha_delta + 0.001));
  CHECK(d.radius_unclipped == doctest::Approx(radius_param(pa, 1 - pa, 30.0, d.rho)));
  CHECK(d.radius <= 30.0);
  CHECK(d.clipped == (d.radius_unclipped > 30.0));

  est.E = 100.0;  // the inner classifier can never reach this
  const Certificate none = distspt(x, base, setup, cfg, est, 1);
  CHECK(none.abstained());
  CHECK_FALSE(none.abstain_reason.empty());

  est.E = 0.1;
  est.alpha_E = 0.6;  // rho pushes p_A below 1/2
  CHECK(distspt(x, base, setup, cfg, est, 1).abstained());

  const auto j = to_json(d);
  CHECK(j["method"] == "distspt");
  CHECK(j["config"]["n_gamma"] == 100);
  CHECK(j["seed"] == 1);
}

TEST_CASE("parameter draws use the requested variances") {
  double s0 = 0, s1 = 0;
  const std::vector<double> var{4.0, 0.25};
  for (std::uint64_t k = 0; k < 20000; ++k) {
    const auto p = sample_parameter(k, 2, 1.0, var);
    s0 += p[0] * p[0];
    s1 += p[1] * p[1];
  }
  CHECK(s0 / 20000 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(s1 / 20000 == doctest::Approx(0.25).epsilon(0.05));
}
