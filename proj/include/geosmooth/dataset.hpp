#pragma once

#include <string>
#include <vector>

#include "geosmooth/image.hpp"

namespace geosmooth {

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

/// Reads an IDX image/label pair (gzip or plain). Pixel bytes are scaled by 1/255.
/// Throws FormatError naming the byte offset on bad magic, truncation or count mismatch.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Reads a whole file through zlib, so gzip and uncompressed files both work.
std::vector<unsigned char> read_maybe_gzip(const std::string& path);

}  // namespace geosmooth
