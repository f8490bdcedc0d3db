#pragma once

#include <string>

#include "geosmooth/image.hpp"

namespace geosmooth {

/// 8-bit grayscale or RGB PNG (alpha dropped, palettes expanded), scaled to [0, 1].
Image read_png(const std::string& path);
/// Writes 1- or 3-channel images as 8-bit PNG; values are clamped to [0, 1] and rounded.
void write_png(const std::string& path, const Image& img);

}  // namespace geosmooth
