// Copyright 2026 The TEL Authors. All Rights Reserved.
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

// PNG and TELT file formats.
//
// TELT layout (all little-endian):
//   bytes 0..3   "TELT"
//   bytes 4..15  uint32 channels, height, width
//   bytes 16..   channels*height*width IEEE-754 float32, (c, y, x) row-major

#ifndef TEL_IO_HPP_
#define TEL_IO_HPP_

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "tel/tensor.hpp"

namespace tel {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int color_type = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;  // rows packed, channels interleaved
};

// libpng reports errors by longjmp. All objects with non-trivial destructors
// are owned by the caller so nothing is skipped when the jump fires.
inline bool read_png_rows(std::FILE* fp, RawPng& out,
                          std::vector<png_bytep>& rows) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.color_type = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (out.bit_depth != 8 || (out.color_type != PNG_COLOR_TYPE_GRAY &&
                             out.color_type != PNG_COLOR_TYPE_RGB &&
                             out.color_type != PNG_COLOR_TYPE_PALETTE)) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;  // header is valid; caller rejects the format
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_set_interlace_handling(png);
  }
  png_read_update_info(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
  out.pixels.resize(stride * out.height);
  rows.resize(out.height);
  for (std::uint32_t y = 0; y < out.height; ++y) {
    rows[y] = out.pixels.data() + y * stride;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline RawPng read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw FormatError("cannot open '" + path + "'");
  std::array<unsigned char, 8> sig{};
  if (std::fread(sig.data(), 1, sig.size(), fp.get()) != sig.size() ||
      png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
    throw FormatError("'" + path + "' is not a PNG file");
  }
  std::rewind(fp.get());
  RawPng raw;
  std::vector<png_bytep> rows;
  if (!read_png_rows(fp.get(), raw, rows)) {
    throw FormatError("'" + path + "': corrupt PNG data");
  }
  if (raw.bit_depth != 8) {
    throw FormatError("'" + path + "': unsupported bit depth " +
                      std::to_string(raw.bit_depth) + " (need 8)");
  }
  return raw;
}

inline bool write_png_rows(std::FILE* fp, std::uint32_t width,
                           std::uint32_t height, int color_type,
                           const png_color* palette, int palette_size,
                           std::vector<png_bytep>& rows) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette != nullptr) png_set_PLTE(png, info, palette, palette_size);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline void write_png(const std::string& path, std::uint32_t width,
                      std::uint32_t height, int color_type, int channels,
                      std::vector<std::uint8_t>& pixels,
                      const png_color* palette = nullptr,
                      int palette_size = 0) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw FormatError("cannot open '" + path + "' for writing");
  std::vector<png_bytep> rows(height);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (std::uint32_t y = 0; y < height; ++y) {
    rows[y] = pixels.data() + y * stride;
  }
  if (!write_png_rows(fp.get(), width, height, color_type, palette,
                      palette_size, rows)) {
    throw FormatError("failed to encode PNG '" + path + "'");
  }
}

// Pascal VOC color map: bit-interleaved RGB for each index.
inline std::array<png_color, 256> voc_palette() {
  std::array<png_color, 256> palette{};
  for (int i = 0; i < 256; ++i) {
    int r = 0, g = 0, b = 0, c = i;
    for (int j = 0; j < 8; ++j) {
      r |= ((c >> 0) & 1) << (7 - j);
      g |= ((c >> 1) & 1) << (7 - j);
      b |= ((c >> 2) & 1) << (7 - j);
      c >>= 3;
    }
    palette[i] = png_color{static_cast<png_byte>(r), static_cast<png_byte>(g),
                           static_cast<png_byte>(b)};
  }
  return palette;
}

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

// Loads an 8-bit grayscale or RGB PNG, scaled to [0, 1].
inline DenseTensor<float> load_image(const std::string& path) {
  detail::RawPng raw = detail::read_png(path);
  if (raw.color_type != PNG_COLOR_TYPE_GRAY &&
      raw.color_type != PNG_COLOR_TYPE_RGB) {
    throw FormatError("'" + path +
                      "': unsupported color type (need 8-bit gray or RGB)");
  }
  const std::size_t c = raw.channels, h = raw.height, w = raw.width;
  DenseTensor<float> out(c, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        out(k, y, x) =
            static_cast<float>(raw.pixels[(y * w + x) * c + k]) / 255.0f;
      }
    }
  }
  return out;
}

// Writes a 1- or 3-channel tensor as 8-bit PNG; values are clamped to [0, 1].
template <typename T>
void save_image(const DenseTensor<T>& image, const std::string& path) {
  const std::size_t c = image.channels();
  if (c != 1 && c != 3) {
    throw ArgumentError("save_image needs 1 or 3 channels, got " +
                        std::to_string(c));
  }
  const std::size_t h = image.height(), w = image.width();
  std::vector<std::uint8_t> pixels(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        double v = std::clamp(static_cast<double>(image(k, y, x)), 0.0, 1.0);
        pixels[(y * w + x) * c + k] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  detail::write_png(path, static_cast<std::uint32_t>(w),
                    static_cast<std::uint32_t>(h),
                    c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                    static_cast<int>(c), pixels);
}

// Reads raw indices from a palette or grayscale 8-bit PNG. The palette
// colors themselves are ignored.
inline LabelMap load_label_map(const std::string& path, int num_classes) {
  detail::RawPng raw = detail::read_png(path);
  if (raw.color_type != PNG_COLOR_TYPE_GRAY &&
      raw.color_type != PNG_COLOR_TYPE_PALETTE) {
    throw FormatError("'" + path +
                      "': label maps must be 8-bit indexed or grayscale PNG");
  }
  try {
    return LabelMap(raw.height, raw.width, num_classes, std::move(raw.pixels));
  } catch (const ValidationError& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

// Writes an indexed PNG carrying the VOC color map, so files open as color
// images in viewers while the stored indices are the labels themselves.
inline void save_label_map(const LabelMap& map, const std::string& path) {
  std::vector<std::uint8_t> pixels(map.labels().begin(), map.labels().end());
  auto palette = detail::voc_palette();
  detail::write_png(path, static_cast<std::uint32_t>(map.width()),
                    static_cast<std::uint32_t>(map.height()),
                    PNG_COLOR_TYPE_PALETTE, 1, pixels, palette.data(),
                    static_cast<int>(palette.size()));
}

inline void save_tensor(const DenseTensor<float>& t, const std::string& path) {
  std::vector<char> buf;
  buf.reserve(16 + 4 * t.size());
  buf.insert(buf.end(), {'T', 'E', 'L', 'T'});
  detail::put_u32(buf, static_cast<std::uint32_t>(t.channels()));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.height()));
  detail::put_u32(buf, static_cast<std::uint32_t>(t.width()));
  for (float v : t.data()) detail::put_u32(buf, std::bit_cast<std::uint32_t>(v));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("failed writing '" + path + "'");
}

inline DenseTensor<float> load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16) {
    throw FormatError("'" + path + "': truncated TELT header");
  }
  if (bytes[0] != 'T' || bytes[1] != 'E' || bytes[2] != 'L' || bytes[3] != 'T') {
    throw FormatError("'" + path + "': bad magic (expected TELT)");
  }
  const std::uint64_t c = detail::get_u32(&bytes[4]);
  const std::uint64_t h = detail::get_u32(&bytes[8]);
  const std::uint64_t w = detail::get_u32(&bytes[12]);
  if (c == 0 || h == 0 || w == 0) {
    throw FormatError("'" + path + "': zero dimension in TELT header");
  }
  const std::uint64_t count = c * h * w;
  if (bytes.size() != 16 + 4 * count) {
    throw FormatError("'" + path + "': payload is " +
                      std::to_string(bytes.size() - 16) + " bytes, expected " +
                      std::to_string(4 * count));
  }
  std::vector<float> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(detail::get_u32(&bytes[16 + 4 * i]));
  }
  return DenseTensor<float>(c, h, w, std::move(data));
}

}  // namespace tel

#endif  // TEL_IO_HPP_
