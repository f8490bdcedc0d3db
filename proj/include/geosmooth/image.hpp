#pragma once

#include <cstddef>
#include <vector>

#include "geosmooth/interval.hpp"

namespace geosmooth {

/// Raster dimensions. Pixels are embedded on the odd integer grid centered at
/// the origin: array index a on an axis of extent n sits at grid coordinate
/// 2a - (n - 1). Neighbouring pixels are 2 grid units apart.
struct GridGeometry {
  int width = 0;
  int height = 0;
  int channels = 1;

  GridGeometry() = default;
  /// Throws DomainError unless width and height are even and positive.
  GridGeometry(int width, int height, int channels = 1);

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t size() const { return plane_size() * channels; }

  static constexpr int to_grid(int index, int extent) { return 2 * index - (extent - 1); }
  /// Array index of an odd grid coordinate; may fall outside [0, extent).
  static constexpr int to_index(int coord, int extent) { return (coord + extent - 1) / 2; }

  int x_of_col(int col) const { return to_grid(col, width); }
  int y_of_row(int row) const { return to_grid(row, height); }
  int max_x() const { return width - 1; }
  int max_y() const { return height - 1; }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Channel-planar raster, data laid out [channel][row][col].
///
/// Grid lookups take (x, y) grid coordinates where x runs along columns and
/// y along rows; anything outside the raster reads as zero.
template <typename T>
class Raster {
 public:
  Raster() = default;
  explicit Raster(GridGeometry g, T fill = T{}) : geom_(g), data_(g.size(), fill) {}
  Raster(GridGeometry g, std::vector<T> data);

  const GridGeometry& geometry() const { return geom_; }
  int width() const { return geom_.width; }
  int height() const { return geom_.height; }
  int channels() const { return geom_.channels; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  std::size_t offset(int c, int row, int col) const {
    return (static_cast<std::size_t>(c) * geom_.height + row) * geom_.width + col;
  }
  T& at(int c, int row, int col) { return data_[offset(c, row, col)]; }
  const T& at(int c, int row, int col) const { return data_[offset(c, row, col)]; }

  bool in_raster(int x, int y) const {
    return x >= -geom_.max_x() && x <= geom_.max_x() && y >= -geom_.max_y() && y <= geom_.max_y();
  }
  /// Value at odd grid point (x, y); T{} (zero) outside the raster.
  T grid_or_zero(int c, int x, int y) const {
    if (!in_raster(x, y)) return T{};
    return at(c, GridGeometry::to_index(y, geom_.height), GridGeometry::to_index(x, geom_.width));
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  GridGeometry geom_;
  std::vector<T> data_;
};

using Image = Raster<double>;
using IntervalImage = Raster<Interval>;

/// Degenerate interval image holding exactly the pixels of `img`.
IntervalImage to_interval_image(const Image& img);
Image lower_image(const IntervalImage& img);
Image upper_image(const IntervalImage& img);
/// True when every pixel of `point` lies in the matching interval, allowing `slack`.
bool pixelwise_contains(const IntervalImage& box, const Image& point, double slack = 0.0);
bool pixelwise_encloses(const IntervalImage& outer, const IntervalImage& inner, double slack = 0.0);
bool any_empty(const IntervalImage& img);
/// Euclidean distance between two images of identical geometry.
double l2_distance(const Image& a, const Image& b);
double l2_norm(const Image& a);
/// Throws DomainError unless every pixel is in [0, 1].
void require_unit_range(const Image& img);

extern template class Raster<double>;
extern template class Raster<Interval>;

}  // namespace geosmooth
