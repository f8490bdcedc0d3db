#include "geosmooth/image.hpp"

#include <cmath>
#include <string>

#include "geosmooth/errors.hpp"

namespace geosmooth {

GridGeometry::GridGeometry(int w, int h, int c) : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || c <= 0) throw DomainError("GridGeometry: dimensions must be positive");
  if (w % 2 != 0 || h % 2 != 0) {
    throw DomainError("GridGeometry: width and height must be even, got " + std::to_string(w) + "x" +
                      std::to_string(h));
  }
}

template <typename T>
Raster<T>::Raster(GridGeometry g, std::vector<T> data) : geom_(g), data_(std::move(data)) {
  if (data_.size() != geom_.size()) {
    throw DomainError("Raster: expected " + std::to_string(geom_.size()) + " values, got " +
                      std::to_string(data_.size()));
  }
}

template class Raster<double>;
template class Raster<Interval>;

IntervalImage to_interval_image(const Image& img) {
  IntervalImage out(img.geometry());
  for (std::size_t k = 0; k < img.data().size(); ++k) out.data()[k] = Interval(img.data()[k]);
  return out;
}

Image lower_image(const IntervalImage& img) {
  Image out(img.geometry());
  for (std::size_t k = 0; k < img.data().size(); ++k) out.data()[k] = img.data()[k].lo();
  return out;
}

Image upper_image(const IntervalImage& img) {
  Image out(img.geometry());
  for (std::size_t k = 0; k < img.data().size(); ++k) out.data()[k] = img.data()[k].hi();
  return out;
}

bool pixelwise_contains(const IntervalImage& box, const Image& point, double slack) {
  if (box.geometry() != point.geometry()) return false;
  for (std::size_t k = 0; k < box.data().size(); ++k) {
    const Interval& iv = box.data()[k];
    const double v = point.data()[k];
    if (iv.is_empty() || v < iv.lo() - slack || v > iv.hi() + slack) return false;
  }
  return true;
}

bool pixelwise_encloses(const IntervalImage& outer, const IntervalImage& inner, double slack) {
  if (outer.geometry() != inner.geometry()) return false;
  for (std::size_t k = 0; k < outer.data().size(); ++k) {
    const Interval& o = outer.data()[k];
    const Interval& i = inner.data()[k];
    if (i.is_empty()) continue;
    if (o.is_empty() || i.lo() < o.lo() - slack || i.hi() > o.hi() + slack) return false;
  }
  return true;
}

bool any_empty(const IntervalImage& img) {
  for (const auto& iv : img.data()) {
    if (iv.is_empty()) return true;
  }
  return false;
}

double l2_distance(const Image& a, const Image& b) {
  if (a.geometry() != b.geometry()) throw DomainError("l2_distance: geometry mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double d = a.data()[k] - b.data()[k];
    s += d * d;
  }
  return std::sqrt(s);
}

double l2_norm(const Image& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

void require_unit_range(const Image& img) {
  for (double v : img.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("image pixel outside [0,1]: " + std::to_string(v));
  }
}

}  // namespace geosmooth
