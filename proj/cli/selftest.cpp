#include "selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "geosmooth/errorbound.hpp"
#include "geosmooth/interval.hpp"
#include "geosmooth/inverse.hpp"
#include "geosmooth/preprocess.hpp"
#include "geosmooth/smoothing.hpp"
#include "geosmooth/stats.hpp"
#include "geosmooth/transform.hpp"
#include "oracles.hpp"

namespace geosmooth::cli {

namespace {

struct Check {
  bool ok = true;
  std::string detail;
};

Image blob_image(std::mt19937_64& rng, int side) {
  // A few Gaussian bumps, smooth enough to look like a digit stroke.
  std::uniform_real_distribution<double> u(-0.6, 0.6), a(0.3, 1.0);
  Image img(GridGeometry(side, side));
  for (int b = 0; b < 4; ++b) {
    const double cx = u(rng) * side, cy = u(rng) * side, amp = a(rng);
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const double x = img.geometry().x_of_col(c), y = img.geometry().y_of_row(r);
        img.at(0, r, c) += amp * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / 40.0);
      }
    }
  }
  for (double& v : img.data()) v = std::min(1.0, v);
  return img;
}

Check interval_ops(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-10, 10), t(0, 1);
  int bad = 0;
  for (int i = 0; i < 20000; ++i) {
    const double a0 = u(rng), a1 = u(rng), b0 = u(rng), b1 = u(rng);
    const Interval A(std::min(a0, a1), std::max(a0, a1)), B(std::min(b0, b1), std::max(b0, b1));
    const double x = A.lo() + t(rng) * (A.hi() - A.lo()), y = B.lo() + t(rng) * (B.hi() - B.lo());
    bad += !(A + B).contains(x + y);
    bad += !(A - B).contains(x - y);
    bad += !(A * B).contains(x * y);
    bad += !sqr(A).contains(x * x);
    if (!B.contains(0.0)) bad += !(A / B).contains(x / y);
  }
  return {bad == 0, std::to_string(bad) + " violations"};
}

Check bilinear(std::mt19937_64& rng) {
  const Image img = blob_image(rng, 16);
  oracle::Plane p{16, 16, img.data()};
  std::uniform_real_distribution<double> u(-17, 17);
  double worst = 0;
  for (int i = 0; i < 5000; ++i) {
    const double x = u(rng), y = u(rng);
    worst = std::max(worst, std::abs(bilinear_interpolate(img, 0, x, y) - oracle::bilinear(p, x, y)));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
  return {worst < 1e-12, buf};
}

Check rotation_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-27, 27), g(-40, 40), w(0, 5);
  int bad = 0;
  for (int i = 0; i < 2000; ++i) {
    const double x = c(rng), y = c(rng), lo = g(rng), hi = lo + w(rng);
    const CoordBox b = inverse_coord_map(TransformKind::rotation, ParamBox({Interval(lo, hi)}), x, y);
    double hull[4];
    oracle::rotation_hull(x, y, lo, hi, 200, hull);
    bad += !(b.x.lo() <= hull[0] + 1e-9 && b.x.hi() >= hull[1] - 1e-9 && b.y.lo() <= hull[2] + 1e-9 &&
             b.y.hi() >= hull[3] - 1e-9);
  }
  return {bad == 0, std::to_string(bad) + " boxes miss the swept hull"};
}

Check transform_containment(std::mt19937_64& rng) {
  int bad = 0, pairs = 0;
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    const Image img = blob_image(rng, 16);
    for (TransformKind kind : {TransformKind::rotation, TransformKind::translation}) {
      const double pm = kind == TransformKind::rotation ? 10.0 : 2.0;
      const ParamBox box = ParamBox::symmetric(kind, pm);
      const IntervalImage enc = apply_transform_interval(img, kind, box);
      for (int s = 0; s < 10; ++s, ++pairs) {
        bad += !pixelwise_contains(enc, apply_transform(img, kind, box.sample_uniform(rng)), 1e-12);
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " of " + std::to_string(pairs) + " transformed images outside"};
}

Check inverse(std::mt19937_64& rng) {
  int bad = 0;
  for (int i = 0; i < 10; ++i) {
    const Image x = blob_image(rng, 16);
    const double g = 20.0 + 6.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const Image observed = apply_transform(x, TransformKind::rotation, std::vector<double>{g});
    InverseOptions opts;
    opts.refinements = 3;
    const auto inv = invert_image(observed, TransformKind::rotation, ParamBox({Interval(20, 26)}), opts);
    bad += !inv.feasible || !pixelwise_contains(inv.image, x, 1e-9);
  }
  return {bad == 0, std::to_string(bad) + " of 10 originals escaped the inverse"};
}

Check clopper_pearson() {
  double worst = 0;
  for (int n : {10, 100, 1000}) {
    for (int k = 0; k <= n; k += std::max(1, n / 20)) {
      for (double a : {0.001, 0.05}) {
        worst = std::max(worst, std::abs(clopper_pearson_lower(k, n, a) - oracle::cp_lower(k, n, a)));
      }
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
  return {worst < 1e-8, buf};
}

Check radii() {
  double worst = 0;
  for (double p : {0.6, 0.9, 0.99, 0.999}) {
    worst = std::max(worst, std::abs(normal_quantile(p) - oracle::phi_inv(p)));
    const double want = 0.25 * (oracle::phi_inv(p) - oracle::phi_inv(1 - p));
    worst = std::max(worst, std::abs(radius_l2(p, 1 - p, 0.5) - want));
    const double rho = 0.01;
    const double wp = 15.0 * (oracle::phi_inv(p - rho) - oracle::phi_inv(1 - p + rho));
    worst = std::max(worst, std::abs(radius_param(p, 1 - p, 30.0, rho) - wp));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max deviation %.2e", worst);
  return {worst < 1e-8, buf};
}

Check blur_kernel() {
  const auto k = gaussian_kernel(1.0, 5);
  double s = 0;
  for (double v : k) s += v;
  const double ratio = k[2 * 5 + 3] / k[2 * 5 + 2];
  return {std::abs(s - 1) < 1e-12 && std::abs(ratio - std::exp(-0.5)) < 1e-12,
          "sum " + std::to_string(s) + ", neighbour ratio " + std::to_string(ratio)};
}

Check error_dominance(std::mt19937_64& rng) {
  int bad = 0;
  for (int i = 0; i < 5; ++i) {
    const Image x = blob_image(rng, 16);
    const ParamBox box = ParamBox::symmetric(TransformKind::rotation, 10.0);
    const std::vector<double> beta{std::normal_distribution<double>(0, 10)(rng)};
    const double bound = epsilon_interval_max(x, beta, box, 4, TransformKind::rotation).bound;
    for (int s = 0; s < 10; ++s) {
      bad += epsilon_concrete(x, beta, box.sample_uniform(rng), TransformKind::rotation) > bound + 1e-9;
    }
  }
  return {bad == 0, std::to_string(bad) + " sampled errors above the interval bound"};
}

}  // namespace

int run_selftest(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::pair<const char*, std::function<Check()>>> checks = {
      {"interval_arithmetic", [&] { return interval_ops(rng); }},
      {"bilinear_interpolation", [&] { return bilinear(rng); }},
      {"rotation_coordinate_box", [&] { return rotation_box(rng); }},
      {"transform_containment", [&] { return transform_containment(rng); }},
      {"inverse_soundness", [&] { return inverse(rng); }},
      {"clopper_pearson", [] { return clopper_pearson(); }},
      {"radius_formulas", [] { return radii(); }},
      {"blur_kernel", [] { return blur_kernel(); }},
      {"error_bound_dominance", [&] { return error_dominance(rng); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    const Check c = fn();
    failed += !c.ok;
    std::printf("selftest %s: %s (%s)\n", name, c.ok ? "PASS" : "FAIL", c.detail.c_str());
  }
  return failed;
}

}  // namespace geosmooth::cli
