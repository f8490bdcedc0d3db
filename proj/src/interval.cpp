#include "geosmooth/interval.hpp"

#include <algorithm>
#include <cstdio>

#include "geosmooth/errors.hpp"

namespace geosmooth {

using detail::round_down;
using detail::round_up;

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi)) throw DomainError("Interval: NaN endpoint");
  if (lo > hi) throw DomainError("Interval: lo > hi (use Interval::empty())");
}

Interval Interval::entire() {
  return Interval(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
}

bool Interval::encloses(const Interval& other) const {
  if (other.empty_) return true;
  if (empty_) return false;
  return lo_ <= other.lo_ && other.hi_ <= hi_;
}

Interval Interval::operator-() const {
  if (empty_) return *this;
  Interval r;
  r.lo_ = -hi_;
  r.hi_ = -lo_;
  return r;
}

Interval operator+(const Interval& a, const Interval& b) {
  if (a.empty_ || b.empty_) return Interval::empty();
  Interval r;
  r.lo_ = round_down(a.lo_ + b.lo_);
  r.hi_ = round_up(a.hi_ + b.hi_);
  return r;
}

Interval operator-(const Interval& a, const Interval& b) { return a + (-b); }

Interval operator*(const Interval& a, const Interval& b) {
  if (a.empty_ || b.empty_) return Interval::empty();
  const double p[4] = {a.lo_ * b.lo_, a.lo_ * b.hi_, a.hi_ * b.lo_, a.hi_ * b.hi_};
  Interval r;
  r.lo_ = round_down(*std::min_element(p, p + 4));
  r.hi_ = round_up(*std::max_element(p, p + 4));
  return r;
}

Interval operator/(const Interval& a, const Interval& b) {
  if (a.empty_ || b.empty_) return Interval::empty();
  if (b.lo_ <= 0.0 && 0.0 <= b.hi_) {
    throw DomainError("interval division by " + b.to_string() + " which contains 0");
  }
  const double p[4] = {a.lo_ / b.lo_, a.lo_ / b.hi_, a.hi_ / b.lo_, a.hi_ / b.hi_};
  Interval r;
  r.lo_ = round_down(*std::min_element(p, p + 4));
  r.hi_ = round_up(*std::max_element(p, p + 4));
  return r;
}

std::string Interval::to_string() const {
  if (empty_) return "EMPTY";
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%.17g, %.17g]", lo_, hi_);
  return buf;
}

Interval join(const Interval& a, const Interval& b) {
  if (a.is_empty()) return b;
  if (b.is_empty()) return a;
  return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

Interval intersect(const Interval& a, const Interval& b) {
  if (a.is_empty() || b.is_empty()) return Interval::empty();
  const double lo = std::max(a.lo(), b.lo());
  const double hi = std::min(a.hi(), b.hi());
  if (lo > hi) return Interval::empty();
  return Interval(lo, hi);
}

Interval sqr(const Interval& a) {
  if (a.is_empty()) return a;
  const double l2 = a.lo() * a.lo();
  const double h2 = a.hi() * a.hi();
  if (a.lo() <= 0.0 && 0.0 <= a.hi()) return Interval(0.0, round_up(std::max(l2, h2)));
  return Interval(std::max(0.0, round_down(std::min(l2, h2))), round_up(std::max(l2, h2)));
}

Interval sqrt(const Interval& a) {
  if (a.is_empty() || a.hi() < 0.0) return Interval::empty();
  const double lo = std::max(0.0, a.lo());
  return Interval(std::max(0.0, round_down(std::sqrt(lo))), round_up(std::sqrt(a.hi())));
}

Interval norm2(std::span<const Interval> v) {
  Interval sum(0.0);
  for (const auto& x : v) sum = sum + sqr(x);
  return sqrt(sum);
}

}  // namespace geosmooth
