#pragma once

#include <random>
#include <string>

#include "geosmooth/dataset.hpp"
#include "geosmooth/image.hpp"

#ifndef GEOSMOOTH_SOURCE_DIR
#define GEOSMOOTH_SOURCE_DIR "."
#endif

namespace testing_support {

inline std::string source_path(const std::string& rel) { return std::string(GEOSMOOTH_SOURCE_DIR) + "/" + rel; }

inline const geosmooth::Dataset& mnist_train() {
  static const geosmooth::Dataset d = geosmooth::load_mnist_idx(
      source_path("data/mnist5k/train-images-idx3-ubyte.gz"), source_path("data/mnist5k/train-labels-idx1-ubyte.gz"));
  return d;
}

inline const geosmooth::Dataset& mnist_test() {
  static const geosmooth::Dataset d = geosmooth::load_mnist_idx(
      source_path("data/mnist5k/test-images-idx3-ubyte.gz"), source_path("data/mnist5k/test-labels-idx1-ubyte.gz"));
  return d;
}

inline geosmooth::Image random_image(std::mt19937_64& rng, int w, int h, int c = 1) {
  geosmooth::Image img(geosmooth::GridGeometry(w, h, c));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

}  // namespace testing_support
