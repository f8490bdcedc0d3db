#include "geosmooth/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "geosmooth/errors.hpp"

namespace geosmooth {

namespace {

bool masked_out(const GridGeometry& g, int row, int col, VignetteKind kind, double margin_px) {
  switch (kind) {
    case VignetteKind::none:
      return false;
    case VignetteKind::circular: {
      const double r = std::min(g.width, g.height) - 1;
      const double x = g.x_of_col(col);
      const double y = g.y_of_row(row);
      return x * x + y * y > r * r;
    }
    case VignetteKind::rectangular: {
      const int m = static_cast<int>(std::ceil(margin_px));
      return col < m || row < m || col >= g.width - m || row >= g.height - m;
    }
  }
  return false;
}

template <typename T>
Raster<T> vignette_impl(const Raster<T>& img, VignetteKind kind, double margin_px) {
  if (margin_px < 0.0) throw DomainError("vignette: negative margin");
  Raster<T> out = img;
  const GridGeometry& g = img.geometry();
  for (int row = 0; row < g.height; ++row) {
    for (int col = 0; col < g.width; ++col) {
      if (!masked_out(g, row, col, kind, margin_px)) continue;
      for (int c = 0; c < g.channels; ++c) out.at(c, row, col) = T{};
    }
  }
  return out;
}

std::vector<double> kernel_1d(double sigma, int size) {
  if (!(sigma > 0.0)) throw DomainError("gaussian blur: sigma must be positive");
  if (size < 1 || size % 2 == 0) throw DomainError("gaussian blur: size must be a positive odd integer");
  std::vector<double> k(size);
  const int h = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - h;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += k[i];
  }
  for (double& v : k) v /= s;
  return k;
}

// Separable zero-padded convolution over a plane of doubles.
void convolve_plane(const double* in, double* out, int w, int h, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  std::vector<double> tmp(static_cast<std::size_t>(w) * h, 0.0);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) {
        const int cc = col + d;
        if (cc >= 0 && cc < w) s += k[d + r] * in[row * w + cc];
      }
      tmp[row * w + col] = s;
    }
  }
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) {
        const int rr = row + d;
        if (rr >= 0 && rr < h) s += k[d + r] * tmp[rr * w + col];
      }
      out[row * w + col] = s;
    }
  }
}

}  // namespace

std::string to_string(VignetteKind kind) {
  switch (kind) {
    case VignetteKind::none:
      return "none";
    case VignetteKind::circular:
      return "circular";
    case VignetteKind::rectangular:
      return "rectangular";
  }
  return "unknown";
}

VignetteKind parse_vignette_kind(std::string_view name) {
  if (name == "none") return VignetteKind::none;
  if (name == "circular") return VignetteKind::circular;
  if (name == "rectangular") return VignetteKind::rectangular;
  throw DomainError("unknown vignette kind '" + std::string(name) + "'");
}

Image vignette(const Image& img, VignetteKind kind, double margin_px) {
  return vignette_impl(img, kind, margin_px);
}

IntervalImage vignette(const IntervalImage& img, VignetteKind kind, double margin_px) {
  return vignette_impl(img, kind, margin_px);
}

std::vector<double> gaussian_kernel(double sigma, int size) {
  const auto k = kernel_1d(sigma, size);
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) out[i * size + j] = k[i] * k[j];
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma, int size) {
  const auto k = kernel_1d(sigma, size);
  const GridGeometry& g = img.geometry();
  Image out(g);
  for (int c = 0; c < g.channels; ++c) {
    convolve_plane(img.data().data() + c * g.plane_size(), out.data().data() + c * g.plane_size(), g.width,
                   g.height, k);
  }
  return out;
}

IntervalImage gaussian_blur(const IntervalImage& img, double sigma, int size) {
  if (any_empty(img)) throw DomainError("gaussian_blur: empty pixel interval");
  const Image lo = gaussian_blur(lower_image(img), sigma, size);
  const Image hi = gaussian_blur(upper_image(img), sigma, size);
  IntervalImage out(img.geometry());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double l = lo.data()[i], u = hi.data()[i];
    out.data()[i] = Interval(detail::round_down(l) - 1e-15, detail::round_up(u) + 1e-15);
  }
  return out;
}

Image preprocess(const Image& img, const Preprocessing& pre) {
  Image out = pre.vignette == VignetteKind::none ? img : vignette(img, pre.vignette, pre.margin_px);
  if (pre.blur_sigma > 0.0) out = gaussian_blur(out, pre.blur_sigma, pre.blur_size);
  return out;
}

IntervalImage preprocess(const IntervalImage& img, const Preprocessing& pre) {
  IntervalImage out = pre.vignette == VignetteKind::none ? img : vignette(img, pre.vignette, pre.margin_px);
  if (pre.blur_sigma > 0.0) out = gaussian_blur(out, pre.blur_sigma, pre.blur_size);
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

IntervalImage quantize_widen(const IntervalImage& img) {
  constexpr double half_step = 1.0 / 510.0;
  IntervalImage out = img;
  for (auto& v : out.data()) {
    if (v.is_empty()) continue;
    const double lo = std::clamp(v.lo() - half_step, 0.0, 1.0);
    const double hi = std::clamp(v.hi() + half_step, 0.0, 1.0);
    v = Interval(lo, hi);
  }
  return out;
}

}  // namespace geosmooth
