#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "geosmooth/image.hpp"

namespace geosmooth {

enum class VignetteKind { none, circular, rectangular };

std::string to_string(VignetteKind kind);
VignetteKind parse_vignette_kind(std::string_view name);

/// Preprocessing applied before classification: vignette, then Gaussian blur.
struct Preprocessing {
  VignetteKind vignette = VignetteKind::none;
  /// Border width in pixels for the rectangular vignette.
  double margin_px = 0.0;
  /// Blur is disabled when blur_sigma <= 0.
  double blur_sigma = 0.0;
  int blur_size = 5;

  bool is_identity() const { return vignette == VignetteKind::none && blur_sigma <= 0.0; }
  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

/// Hard mask. Circular keeps the inscribed disk x^2 + y^2 <= (min(W, H) - 1)^2;
/// rectangular zeroes a border of ceil(margin_px) pixels on every side.
Image vignette(const Image& img, VignetteKind kind, double margin_px = 0.0);
IntervalImage vignette(const IntervalImage& img, VignetteKind kind, double margin_px = 0.0);

/// size x size Gaussian filter sampled at entry centers and normalized to sum 1.
/// Row-major.
std::vector<double> gaussian_kernel(double sigma, int size);

/// Zero-padded convolution with gaussian_kernel(sigma, size). Interval images
/// are convolved endpoint-wise.
Image gaussian_blur(const Image& img, double sigma, int size);
IntervalImage gaussian_blur(const IntervalImage& img, double sigma, int size);

Image preprocess(const Image& img, const Preprocessing& pre);
IntervalImage preprocess(const IntervalImage& img, const Preprocessing& pre);

/// round(v * 255) / 255, the value an 8-bit store would give back.
Image quantize8(const Image& img);
/// Widen every pixel by 1/510 on each side and clamp to [0, 1].
IntervalImage quantize_widen(const IntervalImage& img);

}  // namespace geosmooth
