// Acceptance checks. One line per criterion: "criterion N: PASS|FAIL details".
// Usage: acceptance [N ...]   (no arguments runs all of them)

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "geosmooth/attacks.hpp"
#include "geosmooth/errorbound.hpp"
#include "geosmooth/errors.hpp"
#include "geosmooth/inverse.hpp"
#include "geosmooth/pipelines.hpp"
#include "geosmooth/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace geosmooth;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const Classifier& smooth_model() {
  static const auto m =
      make_classifier("mlp:" + testing_support::source_path("models/mnist_mlp_smooth.json"), GridGeometry(28, 28));
  return *m;
}

const Classifier& plain_model() {
  static const auto m =
      make_classifier("mlp:" + testing_support::source_path("models/mnist_mlp_plain.json"), GridGeometry(28, 28));
  return *m;
}

Dataset head(const Dataset& d, int n) {
  Dataset out;
  for (int i = 0; i < n && i < static_cast<int>(d.size()); ++i) {
    out.images.push_back(d.images[i]);
    out.labels.push_back(d.labels[i]);
  }
  return out;
}

const Preprocessing kVignetteBlur{VignetteKind::circular, 0.0, 2.0, 5};

// 1: concrete transforms lie inside the interval transform.
Outcome interval_soundness() {
  const auto& data = testing_support::mnist_train();
  std::mt19937_64 rng(101);
  struct Setting {
    TransformKind kind;
    double pm;
  };
  const Setting settings[] = {{TransformKind::rotation, 10.0}, {TransformKind::rotation, 30.0}, {TransformKind::translation, 4.0}};
  long pairs = 0, violations = 0;
  for (int s = 0; s < 3; ++s) {
    const ParamBox box = ParamBox::symmetric(settings[s].kind, settings[s].pm);
    for (int i = 0; i < 100; ++i) {
      const Image& x = data.images[s * 100 + i];
      const IntervalImage enc = apply_transform_interval(x, settings[s].kind, box);
      for (int k = 0; k < 34; ++k) {
        const ParamPoint g = box.sample_uniform(rng);
        ++pairs;
        if (!pixelwise_contains(enc, apply_transform(x, settings[s].kind, g))) ++violations;
      }
    }
  }
  return {violations == 0 && pairs >= 10000, fmt("%ld (image, gamma) pairs, %ld violations", pairs, violations)};
}

// 2: inverse soundness and monotone refinement.
Outcome inverse_soundness() {
  const auto& data = testing_support::mnist_train();
  std::mt19937_64 rng(202);
  const ParamBox box = ParamBox::symmetric(TransformKind::rotation, 10.0);
  long misses = 0, widenings = 0, infeasible = 0;
  double w0 = 0.0, w10 = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const Image& x = data.images[t % data.size()];
    const ParamPoint g = box.sample_uniform(rng);
    const bool quantized = t % 2 == 0;
    Image obs = apply_transform(x, TransformKind::rotation, g);
    if (quantized) obs = quantize8(obs);
    InverseOptions opts;
    opts.pixel_tolerance = quantized ? 1.0 / 510 : 0.0;
    InverseResult r = invert_image(obs, TransformKind::rotation, box, opts);
    if (!r.feasible) {
      ++infeasible;
      continue;
    }
    if (!pixelwise_contains(r.image, x)) ++misses;
    double width = 0.0;
    for (const auto& iv : r.image.data()) width += iv.width();
    w0 += width;
    for (int k = 1; k <= 10; ++k) {
      InverseResult next = refine_once(r, obs, TransformKind::rotation, box, opts);
      if (!next.feasible) {
        ++infeasible;
        break;
      }
      if (!pixelwise_contains(next.image, x)) ++misses;
      if (!pixelwise_encloses(r.image, next.image)) ++widenings;
      r = std::move(next);
    }
    width = 0.0;
    for (const auto& iv : r.image.data()) width += iv.width();
    w10 += width;
  }
  const double px = 784.0 * trials;
  return {misses == 0 && widenings == 0 && infeasible == 0,
          fmt("%d trials x 11 levels: %ld containment misses, %ld widenings, %ld infeasible; mean width %.3f -> %.3f",
              trials, misses, widenings, infeasible, w0 / px, w10 / px)};
}

// 3: worked rotation example.
Outcome worked_example() {
  const ParamBox box(std::vector<Interval>{Interval(23, 26)});
  const CoordBox c = inverse_coord_map(TransformKind::rotation, box, 5, 1);
  const bool coord_ok = std::abs(c.x.lo() - 4.06) <= 0.03 && std::abs(c.x.hi() - 4.21) <= 0.03 &&
                        std::abs(c.y.lo() - 2.85) <= 0.03 && std::abs(c.y.hi() - 3.11) <= 0.03;

  const double p = 0.9257;
  const CoordBox r33{c.x, intersect(c.y, Interval(3, 5))};
  const CoordBox r31{c.x, intersect(c.y, Interval(1, 3))};
  const auto q33 = furthest_corner_constraint(p, 0.0, 3, 3, r33);
  const auto q31 = furthest_corner_constraint(p, 0.0, 3, 3, r31);
  bool cons_ok = q33 && q31;
  Interval joined = Interval::empty();
  if (cons_ok) {
    auto near = [](double a, double b) { return std::abs(a - b) <= 0.02; };
    joined = join(*q33, *q31);
    cons_ok = near(q33->lo(), 0.73) && near(q33->hi(), 2.48) && near(q31->lo(), 0.72) && near(q31->hi(), 2.48) &&
              near(joined.lo(), 0.72) && near(joined.hi(), 2.48);
  }
  return {coord_ok && cons_ok,
          fmt("c_{5,1} = [%.3f,%.3f]x[%.3f,%.3f] (%s); q33 = [%.3f,%.3f], q31 = [%.3f,%.3f], join [%.3f,%.3f] vs "
              "expected [0.73,2.48], [0.72,2.48], [0.72,2.48] (%s)",
              c.x.lo(), c.x.hi(), c.y.lo(), c.y.hi(), coord_ok ? "ok" : "off", q33 ? q33->lo() : NAN,
              q33 ? q33->hi() : NAN, q31 ? q31->lo() : NAN, q31 ? q31->hi() : NAN, joined.lo(), joined.hi(),
              cons_ok ? "ok" : "off")};
}

// 4: error ablation with and without preprocessing.
Outcome error_ablation() {
  const auto& data = testing_support::mnist_train();
  const ParamBox box = ParamBox::symmetric(TransformKind::rotation, 30.0);
  std::mt19937_64 rng(404);
  double with = 0.0, without = 0.0;
  for (int i = 0; i < 200; ++i) {
    for (int b = 0; b < 10; ++b) {
      const ParamPoint beta = sample_beta(rng, 1, 30.0);
      std::mt19937_64 g1(rng()), g2 = g1;
      with = std::max(with, epsilon_sampled_max(data.images[i], beta, box, 10, TransformKind::rotation, g1, kVignetteBlur, true).bound);
      without = std::max(without, epsilon_sampled_max(data.images[i], beta, box, 10, TransformKind::rotation, g2, {}, true).bound);
    }
  }
  const bool ok = with >= 0.25 && with <= 0.55 && without >= 1.8 && without <= 3.2;
  return {ok, fmt("max eps with vignette+blur %.3f (target [0.25,0.55]), without %.3f (target [1.8,3.2])", with, without)};
}

// 5: radius formulas.
Outcome radius_formulas() {
  const double r = radius_l2(0.99, 0.01, 0.3);
  const double oracle_r = 0.15 * (oracle::phi_inv(0.99) - oracle::phi_inv(0.01));
  double worst = 0.0;
  for (double pa : {0.51, 0.6, 0.75, 0.9, 0.99, 0.9999}) {
    for (double s : {0.25, 1.0, 30.0}) worst = std::max(worst, std::abs(radius_param(pa, 1 - pa, s, 0.0) - radius_l2(pa, 1 - pa, s)));
  }
  const double zero = radius_l2(0.4, 0.4, 0.5);
  const bool ok = std::abs(r - 0.697904) <= 1e-6 && std::abs(r - oracle_r) <= 1e-6 && worst <= 1e-12 && zero == 0.0;
  return {ok, fmt("radius_l2(0.99,0.01,0.3) = %.7f (oracle %.7f); max |param(rho=0) - l2| = %.1e; equal p -> %.1g", r,
                  oracle_r, worst, zero)};
}

// 6: Clopper-Pearson.
Outcome clopper_pearson() {
  double closed = 0.0, general = 0.0;
  for (int n : {1, 10, 100, 500, 8000})
    for (double a : {0.001, 0.01, 0.05}) closed = std::max(closed, std::abs(clopper_pearson_lower(n, n, a) - std::pow(a, 1.0 / n)));
  std::mt19937_64 rng(606);
  general = std::abs(clopper_pearson_lower(150, 200, 0.002) - oracle::cp_lower(150, 200, 0.002));
  for (int t = 0; t < 300; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 5000)(rng);
    const int k = std::uniform_int_distribution<int>(0, n)(rng);
    const double a = std::uniform_real_distribution<double>(1e-4, 0.2)(rng);
    general = std::max(general, std::abs(clopper_pearson_lower(k, n, a) - oracle::cp_lower(k, n, a)));
  }
  std::binomial_distribution<int> bin(500, 0.8);
  const double alpha = 0.05;
  int above = 0;
  for (int t = 0; t < 10000; ++t) above += clopper_pearson_lower(bin(rng), 500, alpha) > 0.8;
  const double rate = above / 10000.0;
  const bool ok = closed <= 1e-9 && general <= 1e-9 && rate <= alpha + 0.01;
  return {ok, fmt("closed form err %.1e, bisection err %.1e, coverage failure rate %.4f (limit %.2f)", closed, general,
                  rate, alpha + 0.01)};
}

// 7: volume scaling composes exactly, so the parameter certificate is sound.
Outcome composable_volume() {
  const double sigma = 3.0, alpha = 0.01;
  const int n0 = 100, n = 2000;
  std::mt19937_64 rng(707);
  int certified = 0, violations = 0, attempts = 0;
  long grid_points = 0;
  while (certified < 100 && attempts < 1000) {
    ++attempts;
    const std::vector<double> signal{std::uniform_real_distribution<double>(0.2, 1.0)(rng)};
    const double threshold = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    // class 1 iff the scaled amplitude exceeds the threshold
    auto classify = [threshold](const std::vector<double>& s) { return s[0] > threshold ? 1 : 0; };
    auto labeler_at = [&](double gamma) {
      return SeedLabeler([&, gamma](std::span<const std::uint64_t> seeds) {
        std::vector<int> out;
        const auto shifted = volume_scale(signal, gamma);
        for (auto s : seeds) out.push_back(classify(volume_scale(shifted, sample_parameter(s, 1, sigma)[0])));
        return out;
      });
    };
    const auto r = smooth_predict_certify(labeler_at(0.0), 2, n0, n, alpha, rng());
    if (r.prediction == kAbstain) continue;
    const double radius = radius_param(r.p_A_lower, 1 - r.p_A_lower, sigma, 0.0);
    if (!(radius > 0)) continue;
    ++certified;
    // Exact smoothed classifier: P(class 1 | gamma) = Phi((gamma + 20 log10(a / t)) / sigma).
    const double m = 20.0 * std::log10(signal[0] / threshold);
    bool changed = false;
    for (int k = 0; k <= 200; ++k) {
      const double gamma = -radius + 2.0 * radius * k / 200;
      const double p1 = oracle::phi((gamma + m) / sigma);
      const int g = p1 > 0.5 ? 1 : 0;
      ++grid_points;
      if (g != r.prediction) changed = true;
    }
    violations += changed;
  }
  const double budget = alpha * 100;
  return {certified == 100 && violations <= budget,
          fmt("%d certified instances, %ld grid points, %d with a prediction change (alpha budget %.0f)", certified,
              grid_points, violations, budget)};
}

// 8: the heuristic radius can be violated on rotations.
Outcome heuristic_gap() {
  const auto& data = testing_support::mnist_test();
  TransformSetup setup;
  setup.gamma = ParamBox::symmetric(TransformKind::rotation, 30.0);
  SmoothingConfig cfg;
  cfg.sigma_gamma = 5.0;
  cfg.n_gamma = 1000;
  std::mt19937_64 rng(808);
  int scanned = 0, certified = 0, found_image = -1;
  double found_gamma = 0, found_radius = 0;
  int found_cert = -1, found_pred = -1, composed_pred = -1;
  for (int i = 0; i < 100 && found_image < 0; ++i) {
    const Image& x = data.images[i];
    ++scanned;
    const Certificate c = basespt(x, plain_model(), setup, cfg, rng());
    if (c.abstained()) continue;
    ++certified;
    const double reach = std::min(c.radius_unclipped, 30.0);
    for (int s = 0; s <= 20 && found_image < 0; ++s) {
      const double g = -reach + 2.0 * reach * s / 20;
      const Image xt = quantize8(apply_transform(x, TransformKind::rotation, std::vector<double>{g}));
      const int pred = smooth_predict(make_base_labeler(xt, plain_model(), setup, cfg), 10, 1000, 0.001, rng());
      if (pred != kAbstain && pred != c.prediction) {
        found_image = i;
        found_gamma = g;
        found_radius = c.radius_unclipped;
        found_cert = c.prediction;
        found_pred = pred;
        // The same vote with the rotations composed exactly, for comparison.
        const SeedLabeler composed = [&](std::span<const std::uint64_t> seeds) {
          std::vector<Image> batch;
          for (auto sd : seeds) {
            const double beta = sample_parameter(sd, 1, cfg.sigma_gamma)[0];
            batch.push_back(apply_transform(x, TransformKind::rotation, std::vector<double>{beta + g}));
          }
          return plain_model().classify_batch(batch);
        };
        composed_pred = smooth_predict(composed, 10, 1000, 0.001, rng());
      }
    }
  }
  if (found_image < 0) return {false, fmt("no violation in %d images (%d certified)", scanned, certified)};
  return {true, fmt("image %d: heuristic radius %.2f deg for class %d, but the rotation by %.2f deg is classified %d "
                    "(exactly composed rotation: %d); expected behaviour of the heuristic pipeline",
                    found_image, found_radius, found_cert, found_gamma, found_pred, composed_pred)};
}

// 9: distributional pipeline soundness.
Outcome distributional_soundness() {
  const auto& train = testing_support::mnist_train();
  const auto& test = testing_support::mnist_test();
  ErrorBoundConfig ecfg;
  ecfg.gamma = ParamBox::symmetric(TransformKind::rotation, 30.0);
  ecfg.pre = kVignetteBlur;
  ecfg.gamma_mode = GammaMode::sampled;
  ecfg.gamma_samples = 10;
  ecfg.n_x = 200;
  ecfg.n_beta = 10;
  ecfg.seed = 909;
  const ScanResult scan = propose_E(head(train, 200), ecfg);
  ecfg.n_x = 100;
  ecfg.n_beta = 1000;
  ecfg.alpha_E = 0.01;
  ecfg.seed = 910;
  const ErrorBoundEstimate est = estimate_E_distributional(train, ecfg, scan.E);

  TransformSetup setup{TransformKind::rotation, ecfg.gamma, kVignetteBlur};
  SmoothingConfig cfg;
  cfg.n_gamma = 200;
  cfg.n_delta = 200;
  cfg.sigma_delta = 0.5;
  std::mt19937_64 rng(911);
  int certified = 0, checks = 0, violations = 0;
  for (int i = 0; i < 100; ++i) {
    const Image& x = test.images[i];
    const Certificate c = distspt(x, smooth_model(), setup, cfg, est, rng());
    if (c.abstained()) continue;
    ++certified;
    const double reach = std::min(c.radius_unclipped, 30.0);
    for (int k = 0; k < 2; ++k) {
      const double g = std::uniform_real_distribution<double>(-reach, reach)(rng);
      const Image xt = quantize8(apply_transform(x, TransformKind::rotation, std::vector<double>{g}));
      const int pred =
          smooth_predict(make_robust_labeler(xt, smooth_model(), setup, cfg, est.E), 10, cfg.n_gamma, cfg.alpha_gamma, rng());
      ++checks;
      if (pred != kAbstain && pred != c.prediction) ++violations;
    }
  }
  const double budget = cfg.alpha_gamma + cfg.alpha_delta + est.alpha_E + (1.0 - est.q_E_lower);
  const double rate = checks ? static_cast<double>(violations) / checks : 0.0;
  return {est.passed && certified > 0 && rate <= budget,
          fmt("E = %.3f (scan max %.3f), q_E >= %.3f; %d/100 certified; %d/%d sampled gammas changed the prediction "
              "(rate %.3f, budget %.3f)",
              est.E, scan.eps_max, est.q_E_lower, certified, violations, checks, rate, budget)};
}

// 10: individual pipeline on attacked inputs with the original held back.
Outcome individual_pipeline() {
  const auto& test = testing_support::mnist_test();
  TransformSetup setup{TransformKind::rotation, ParamBox::symmetric(TransformKind::rotation, 10.0), kVignetteBlur};
  SmoothingConfig cfg;
  cfg.n_gamma = 200;
  cfg.n_delta = 200;
  cfg.sigma_delta = 0.5;
  ErrorBoundConfig ecfg;
  ecfg.n_splits = 64;
  ecfg.n_beta = 100;
  ecfg.refinements = 10;
  const double E = 0.7;
  std::mt19937_64 rng(1010);
  int issued = 0, covering = 0, abstained = 0, infeasible = 0, oracle_fail = 0;
  for (int i = 0; i < 20; ++i) {
    const Image& x = test.images[i];
    const auto atk = worst_of_k(x, test.labels[i], smooth_model(), TransformKind::rotation, setup.gamma, 100, rng(),
                                setup.pre, true, i);
    Certificate c;
    try {
      ecfg.seed = rng();
      c = indivspt(atk.attacked, smooth_model(), setup, cfg, ecfg, E, rng());
    } catch (const InfeasibleInput&) {
      ++infeasible;
      continue;
    }
    if (c.abstained()) {
      ++abstained;
      continue;
    }
    ++issued;
    if (!c.covers_gamma) continue;
    ++covering;
    // g's majority vote on the original, from fresh samples.
    const auto labels = label_seeds(make_robust_labeler(x, smooth_model(), setup, cfg, E), draw_seeds(rng(), 400));
    const auto counts = count_labels(labels, 10);
    if (argmax(std::vector<double>(counts.begin(), counts.end())) != c.prediction) ++oracle_fail;
  }
  return {covering >= 1 && oracle_fail == 0,
          fmt("20 attacked images: %d certified (%d covering the whole box), %d abstained, %d infeasible; "
              "held-back original disagreed on %d",
              issued, covering, abstained, infeasible, oracle_fail)};
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, Criterion> all{
      {1, {"interval transform soundness", 300, interval_soundness}},
      {2, {"inverse soundness and monotone refinement", 1800, inverse_soundness}},
      {3, {"worked rotation example", 60, worked_example}},
      {4, {"interpolation error ablation", 1200, error_ablation}},
      {5, {"radius formulas", 60, radius_formulas}},
      {6, {"Clopper-Pearson bounds", 60, clopper_pearson}},
      {7, {"composable volume transform", 600, composable_volume}},
      {8, {"heuristic radius violation", 1800, heuristic_gap}},
      {9, {"distributional pipeline soundness", 3600, distributional_soundness}},
      {10, {"individual pipeline completion", 3600, individual_pipeline}},
  };
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
  if (chosen.empty())
    for (const auto& [k, v] : all) chosen.push_back(k);

  int failures = 0;
  for (int k : chosen) {
    const auto it = all.find(k);
    if (it == all.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= it->second.limit_s;
    const bool pass = o.pass && in_time;
    std::printf("criterion %d: %s %s: %s [%.1f s%s]\n", k, pass ? "PASS" : "FAIL", it->second.name, o.detail.c_str(), secs,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
    failures += !pass;
  }
  return failures == 0 ? 0 : 1;
}
