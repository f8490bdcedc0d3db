#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace geosmooth {

namespace detail {

inline constexpr double kUlpWiden = 4.0 * std::numeric_limits<double>::epsilon();
inline constexpr double kTinyWiden = 4.0 * std::numeric_limits<double>::denorm_min();

// Nudge an endpoint outward by roughly 4 ULPs.
inline double round_down(double x) { return x - (std::abs(x) * kUlpWiden + kTinyWiden); }
inline double round_up(double x) { return x + (std::abs(x) * kUlpWiden + kTinyWiden); }

}  // namespace detail

/// Closed real interval [lo, hi] with an explicit empty value.
///
/// Arithmetic is performed in round-to-nearest and then widened outward by a
/// few ULPs, so every result contains all pointwise combinations of its
/// operands. The empty interval absorbs in arithmetic and is the identity of
/// join.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr Interval(double point) : lo_(point), hi_(point) {}  // NOLINT
  Interval(double lo, double hi);

  static constexpr Interval empty() {
    Interval r;
    r.empty_ = true;
    return r;
  }
  static Interval unit() { return Interval(0.0, 1.0); }
  static Interval entire();

  constexpr bool is_empty() const { return empty_; }
  constexpr double lo() const { return lo_; }
  constexpr double hi() const { return hi_; }
  double width() const { return empty_ ? 0.0 : hi_ - lo_; }
  double mid() const { return 0.5 * (lo_ + hi_); }
  double mag() const { return empty_ ? 0.0 : std::max(std::abs(lo_), std::abs(hi_)); }
  bool contains(double x) const { return !empty_ && lo_ <= x && x <= hi_; }
  /// True when `other` lies inside this interval. The empty set is inside everything.
  bool encloses(const Interval& other) const;

  Interval operator-() const;
  friend Interval operator+(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a, const Interval& b);
  friend Interval operator*(const Interval& a, const Interval& b);
  /// Throws DomainError when `b` contains zero.
  friend Interval operator/(const Interval& a, const Interval& b);

  friend bool operator==(const Interval& a, const Interval& b) {
    if (a.empty_ || b.empty_) return a.empty_ == b.empty_;
    return a.lo_ == b.lo_ && a.hi_ == b.hi_;
  }

  std::string to_string() const;

 private:
  double lo_ = 0.0;
  double hi_ = 0.0;
  bool empty_ = false;
};

/// Smallest interval containing both operands.
Interval join(const Interval& a, const Interval& b);
Interval intersect(const Interval& a, const Interval& b);
inline bool contains(const Interval& a, double x) { return a.contains(x); }

Interval sqr(const Interval& a);
/// Square root of the non-negative part; empty if `a` lies entirely below zero.
Interval sqrt(const Interval& a);
/// Enclosure of the Euclidean norm over every vector with components in `v`.
Interval norm2(std::span<const Interval> v);

}  // namespace geosmooth
