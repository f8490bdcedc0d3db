#pragma once

// Reference computations for the tests. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lbt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(lbt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// alpha-quantile of Beta(k, n - k + 1) by bisection on the CDF.
inline double cp_lower(int k, int n, double alpha) {
  if (k == 0) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ibeta(k, n - k + 1, mid) < alpha) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double phi_inv(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi(mid) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Bilinear value straight from the interpolation formula. Pixels live at odd
// coordinates, index a <-> 2a - (n - 1); anything off the raster is 0.
struct Plane {
  int w, h;
  std::vector<double> v;  // row-major
  double at_grid(int x, int y) const {
    if ((x % 2 == 0) || (y % 2 == 0)) return 0.0;
    const int col = (x + w - 1) / 2, row = (y + h - 1) / 2;
    if (col < 0 || col >= w || row < 0 || row >= h) return 0.0;
    return v[row * w + col];
  }
};

inline double bilinear(const Plane& p, double x, double y) {
  int v = static_cast<int>(std::floor(x));
  if (((v % 2) + 2) % 2 == 0) v -= 1;
  int w = static_cast<int>(std::floor(y));
  if (((w % 2) + 2) % 2 == 0) w -= 1;
  const double r = p.at_grid(v, w) * (2 + v - x) / 2 * (2 + w - y) / 2 +
                   p.at_grid(v, w + 2) * (2 + v - x) / 2 * (y - w) / 2 +
                   p.at_grid(v + 2, w) * (x - v) / 2 * (2 + w - y) / 2 +
                   p.at_grid(v + 2, w + 2) * (x - v) / 2 * (y - w) / 2;
  return std::min(1.0, std::max(0.0, r));
}

inline void rotate_point(double x, double y, double deg, double& ox, double& oy) {
  const double t = deg * 3.14159265358979323846 / 180.0;
  ox = x * std::cos(t) - y * std::sin(t);
  oy = x * std::sin(t) + y * std::cos(t);
}

// Hull of the rotated point over a dense angle grid.
inline void rotation_hull(double x, double y, double a0, double a1, int steps, double box[4]) {
  box[0] = box[2] = std::numeric_limits<double>::infinity();
  box[1] = box[3] = -std::numeric_limits<double>::infinity();
  for (int s = 0; s <= steps; ++s) {
    double ox, oy;
    rotate_point(x, y, a0 + (a1 - a0) * s / steps, ox, oy);
    box[0] = std::min(box[0], ox);
    box[1] = std::max(box[1], ox);
    box[2] = std::min(box[2], oy);
    box[3] = std::max(box[3], oy);
  }
}

}  // namespace oracle
