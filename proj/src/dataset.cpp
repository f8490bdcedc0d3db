#include "geosmooth/dataset.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <memory>

#include "geosmooth/errors.hpp"

namespace geosmooth {

namespace {

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& path) {
  if (off + 4 > buf.size()) {
    throw FormatError(path + ": truncated header at byte offset " + std::to_string(off));
  }
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

void expect_magic(const std::vector<unsigned char>& buf, std::uint32_t magic, const std::string& path) {
  const std::uint32_t got = read_be32(buf, 0, path);
  if (got != magic) {
    char msg[96];
    std::snprintf(msg, sizeof msg, ": bad magic 0x%08x at byte offset 0 (expected 0x%08x)", got, magic);
    throw FormatError(path + msg);
  }
}

}  // namespace

std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  std::unique_ptr<gzFile_s, int (*)(gzFile)> f(gzopen(path.c_str(), "rb"), gzclose);
  if (!f) throw FormatError(path + ": cannot open");
  std::vector<unsigned char> out;
  unsigned char chunk[1 << 16];
  while (true) {
    const int n = gzread(f.get(), chunk, sizeof chunk);
    if (n < 0) throw FormatError(path + ": decompression failed after byte offset " + std::to_string(out.size()));
    if (n == 0) break;
    out.insert(out.end(), chunk, chunk + n);
  }
  return out;
}

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_maybe_gzip(images_path);
  const auto lab = read_maybe_gzip(labels_path);
  expect_magic(img, 0x00000803u, images_path);
  expect_magic(lab, 0x00000801u, labels_path);

  const std::uint32_t n = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint32_t nl = read_be32(lab, 4, labels_path);
  if (n != nl) {
    throw FormatError(labels_path + ": label count " + std::to_string(nl) + " at byte offset 4 does not match " +
                      std::to_string(n) + " images");
  }
  const std::size_t plane = std::size_t(rows) * cols;
  const std::size_t need_img = 16 + plane * n;
  if (img.size() < need_img) {
    throw FormatError(images_path + ": truncated pixel data at byte offset " + std::to_string(img.size()) +
                      " (expected " + std::to_string(need_img) + " bytes)");
  }
  if (lab.size() < 8 + std::size_t(n)) {
    throw FormatError(labels_path + ": truncated label data at byte offset " + std::to_string(lab.size()));
  }

  const GridGeometry g(static_cast<int>(cols), static_cast<int>(rows), 1);
  Dataset ds;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    std::vector<double> px(plane);
    const unsigned char* p = img.data() + 16 + plane * k;
    for (std::size_t i = 0; i < plane; ++i) px[i] = p[i] / 255.0;
    ds.images.emplace_back(g, std::move(px));
    ds.labels.push_back(lab[8 + k]);
  }
  return ds;
}

}  // namespace geosmooth
