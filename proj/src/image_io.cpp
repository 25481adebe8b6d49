// Copyright 2026 The crseg Authors. All Rights Reserved.
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

#include "crseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crseg/errors.hpp"

namespace crseg {
namespace {

void write_raw(const std::filesystem::path& path, int width, int height, bool rgb,
               const std::vector<std::uint8_t>& pixels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (png_image_write_to_file(&img, path.string().c_str(), 0, pixels.data(), 0, nullptr) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot write " + path.string() + ": " + msg);
  }
}

// Returns interleaved pixels; channels is 1 for gray sources, else 3.
std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, bool force_gray, int& width,
                                   int& height, int& channels) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&img, path.string().c_str()) == 0) {
    throw FormatError("cannot read " + path.string() + ": " + img.message);
  }
  const bool gray = force_gray || (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode " + path.string() + ": " + msg);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  channels = gray ? 1 : 3;
  return pixels;
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_png(const std::filesystem::path& path, const Tensor& image) {
  const int c = image.channels();
  if (c != 1 && c != 3) throw ArgumentError("write_png: expected 1 or 3 channels");
  const std::size_t plane = image.dims().plane();
  std::vector<std::uint8_t> pixels(plane * static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      pixels[i * c + ch] = quantize(image.data()[static_cast<std::size_t>(ch) * plane + i]);
    }
  }
  write_raw(path, image.width(), image.height(), c == 3, pixels);
}

Tensor read_png(const std::filesystem::path& path) {
  int w = 0, h = 0, c = 0;
  const auto pixels = read_raw(path, false, w, h, c);
  Tensor t(c, h, w);
  const std::size_t plane = t.dims().plane();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      t.data()[static_cast<std::size_t>(ch) * plane + i] = static_cast<float>(pixels[i * c + ch]) / 255.0f;
    }
  }
  return t;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> pixels(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), pixels.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_raw(path, mask.width, mask.height, false, pixels);
}

Mask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0, c = 0;
  const auto pixels = read_raw(path, true, w, h, c);
  Mask m(h, w);
  std::transform(pixels.begin(), pixels.end(), m.data.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); });
  return m;
}

}  // namespace crseg
