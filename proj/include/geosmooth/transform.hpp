#pragma once

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geosmooth/image.hpp"
#include "geosmooth/interval.hpp"

namespace geosmooth {

/// Parameterized transformation families. Rotation angles are in degrees,
/// translations in pixels (x, y), volume scaling in decibels.
enum class TransformKind { rotation, translation, volume_scale };

int param_dim(TransformKind kind);
std::string to_string(TransformKind kind);
/// Accepts "rotation", "translation", "volume_scale" (or "volume"). Throws DomainError.
TransformKind parse_transform_kind(std::string_view name);

using ParamPoint = std::vector<double>;

/// Axis-aligned box of transformation parameters.
class ParamBox {
 public:
  ParamBox() = default;
  explicit ParamBox(std::vector<Interval> dims);

  /// [-pm, pm]^d for the parameter dimension of `kind`.
  static ParamBox symmetric(TransformKind kind, double pm);
  static ParamBox point(std::span<const double> p);

  int dim() const { return static_cast<int>(dims_.size()); }
  const Interval& operator[](int d) const { return dims_[d]; }
  const std::vector<Interval>& dims() const { return dims_; }

  bool contains(std::span<const double> p) const;
  /// Partition into per_dim^d equal sub-boxes, row-major over dimensions.
  std::vector<ParamBox> split(int per_dim) const;
  /// Largest Euclidean norm of any point in the box.
  double circumradius() const;
  /// The box translated by `offset` (Minkowski sum with a point).
  ParamBox shifted(std::span<const double> offset) const;
  ParamPoint sample_uniform(std::mt19937_64& rng) const;

  friend bool operator==(const ParamBox&, const ParamBox&) = default;

 private:
  std::vector<Interval> dims_;
};

/// Enclosure of a set of planar grid coordinates.
struct CoordBox {
  Interval x;
  Interval y;
  bool is_empty() const { return x.is_empty() || y.is_empty(); }
};

CoordBox intersect(const CoordBox& a, const CoordBox& b);

/// Range of cos(t) for t in [t0, t1] (radians), exact up to rounding.
Interval cos_range(double t0, double t1);
Interval sin_range(double t0, double t1);

/// Source coordinate an output pixel reads from: T_gamma^{-1}(x, y).
/// Rotation maps (x, y) to (x cos g - y sin g, x sin g + y cos g);
/// translation by (tx, ty) pixels maps to (x - 2 tx, y - 2 ty).
std::array<double, 2> inverse_coord_map(TransformKind kind, std::span<const double> gamma, double x,
                                        double y);
/// Sound enclosure of { T_gamma^{-1}(x, y) : gamma in box }.
CoordBox inverse_coord_map(TransformKind kind, const ParamBox& box, double x, double y);
/// Sound enclosure of { T_gamma(p) : gamma in box, p in region }.
CoordBox forward_coord_map(TransformKind kind, const ParamBox& box, const CoordBox& region);

/// Odd grid coordinate v with x in [v, v + 2).
inline int cell_of(double x) { return 2 * static_cast<int>(std::floor((x - 1.0) * 0.5)) + 1; }

/// Bilinear interpolation of one channel at real grid coordinates (x, y).
double bilinear_interpolate(const Image& img, int channel, double x, double y);

/// T_gamma^I: every output pixel samples the input at its inverse-mapped coordinate.
/// For volume_scale the pixel values are scaled instead.
Image apply_transform(const Image& img, TransformKind kind, std::span<const double> gamma);
/// Sound enclosure of { T_gamma^I(x) : gamma in box, x in img }.
IntervalImage apply_transform_interval(const IntervalImage& img, TransformKind kind, const ParamBox& box);
IntervalImage apply_transform_interval(const Image& img, TransformKind kind, const ParamBox& box);

/// Multiply every sample by 10^(beta_db / 20).
std::vector<double> volume_scale(std::span<const double> signal, double beta_db);

}  // namespace geosmooth
