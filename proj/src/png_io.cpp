#include "geosmooth/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "geosmooth/errors.hpp"

namespace geosmooth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Image read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw FormatError(path + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": libpng initialisation failed");
  }
  std::vector<unsigned char> pixels;
  png_uint_32 w = 0, h = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": not a readable PNG");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if ((color & PNG_COLOR_MASK_ALPHA) || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.resize(stride * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const GridGeometry g(static_cast<int>(w), static_cast<int>(h), channels);
  Image img(g);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      for (int ch = 0; ch < channels; ++ch) img.at(ch, r, c) = rows[r][c * channels + ch] / 255.0;
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& img) {
  const GridGeometry& g = img.geometry();
  if (g.channels != 1 && g.channels != 3) throw DomainError("write_png: only 1 or 3 channels are supported");
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw FormatError(path + ": cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw FormatError(path + ": libpng initialisation failed");
  }
  std::vector<unsigned char> buf(g.size());
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      for (int ch = 0; ch < g.channels; ++ch) {
        const double v = std::clamp(img.at(ch, r, c), 0.0, 1.0);
        buf[(static_cast<std::size_t>(r) * g.width + c) * g.channels + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  std::vector<png_bytep> rows(g.height);
  for (int r = 0; r < g.height; ++r) rows[r] = buf.data() + static_cast<std::size_t>(r) * g.width * g.channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError(path + ": PNG encoding failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, g.width, g.height, 8, g.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace geosmooth
