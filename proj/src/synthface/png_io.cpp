// Copyright 2026 The dfx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dfx/synthface/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dfx/core/error.hpp"

namespace dfx::synthface {
namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_cb(png_structp) {}

void read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

[[noreturn]] void error_cb(png_structp, png_const_charp msg) {
  throw IoError(std::string("png: ") + msg);
}

void warn_cb(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw ContractError("PNG bit depth must be 8 or 16");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3)
    throw ShapeError("PNG pixel buffer does not match dimensions");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warn_cb);
  if (png == nullptr) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  const int bytes_per = bit_depth / 8;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3 * bytes_per);
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  try {
    png_set_write_fn(png, &out, write_cb, flush_cb);
    png_set_IHDR(png, info, image.width, image.height, bit_depth,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      for (int i = 0; i < image.width * 3; ++i) {
        const double v = std::clamp<double>(
            image.pixels[static_cast<std::size_t>(y) * image.width * 3 + i], 0.0, 1.0);
        const auto q = static_cast<std::uint32_t>(std::lround(v * maxv));
        if (bit_depth == 16) {
          row[2 * i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
          row[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
        } else {
          row[i] = static_cast<std::uint8_t>(q);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image,
               int bit_depth) {
  const auto bytes = encode_png(image, bit_depth);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw IoError("not a PNG stream");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warn_cb);
  if (png == nullptr) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  RgbImage img;
  ReadCursor cur{&bytes, 0};
  try {
    png_set_read_fn(png, &cur, read_cb);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth < 8) png_set_expand(png);
    const bool wide = depth == 16;
    if (wide) png_set_swap(png);  // little-endian u16 rows on x86
    png_read_update_info(png, info);
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> row(rowbytes);
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int i = 0; i < img.width * 3; ++i) {
        float v;
        if (wide) {
          std::uint16_t q;
          std::memcpy(&q, row.data() + 2 * i, 2);
          v = static_cast<float>(q / 65535.0);
        } else {
          v = static_cast<float>(row[i] / 255.0);
        }
        img.pixels[static_cast<std::size_t>(y) * img.width * 3 + i] = v;
      }
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

RgbImage read_png(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace dfx::synthface
