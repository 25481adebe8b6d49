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

#include "crseg/crop_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "crseg/errors.hpp"

namespace crseg {

Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x0, b.x0);
  const int y0 = std::max(a.y0, b.y0);
  const int x1 = std::min(a.x0 + a.w, b.x0 + b.w);
  const int y1 = std::min(a.y0 + a.h, b.y0 + b.h);
  return Rect{x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

CropPair make_crop_pair(const Rect& crop_a, const Rect& crop_b) {
  const Rect o = intersect(crop_a, crop_b);
  return CropPair{crop_a, crop_b, Rect{o.x0 - crop_a.x0, o.y0 - crop_a.y0, o.w, o.h},
                  Rect{o.x0 - crop_b.x0, o.y0 - crop_b.y0, o.w, o.h}};
}

namespace {

// Overlap area of two size x size crops offset by (dx, dy).
long long overlap_area(int size, int dx, int dy) {
  const int ox = std::max(0, size - std::abs(dx));
  const int oy = std::max(0, size - std::abs(dy));
  return static_cast<long long>(ox) * oy;
}

}  // namespace

CropPair sample_crop_pair(int image_h, int image_w, int crop_size, double min_overlap_fraction,
                          Rng& rng) {
  if (crop_size <= 0 || crop_size > std::min(image_h, image_w)) {
    throw ArgumentError("sample_crop_pair: crop size " + std::to_string(crop_size) +
                        " does not fit a " + std::to_string(image_h) + "x" +
                        std::to_string(image_w) + " image");
  }
  if (!(min_overlap_fraction > 0.0) || min_overlap_fraction > 1.0) {
    throw ArgumentError("sample_crop_pair: min_overlap_fraction must be in (0, 1]");
  }
  const int range_x = image_w - crop_size + 1;
  const int range_y = image_h - crop_size + 1;
  const Rect a{static_cast<int>(rng.index(static_cast<std::uint64_t>(range_x))),
               static_cast<int>(rng.index(static_cast<std::uint64_t>(range_y))), crop_size, crop_size};
  const auto crop_area = static_cast<double>(crop_size) * crop_size;
  const auto accepts = [&](int bx, int by) {
    return static_cast<double>(overlap_area(crop_size, bx - a.x0, by - a.y0)) >=
           min_overlap_fraction * crop_area;
  };

  // Rejection sampling first; exhaustive enumeration keeps the draw uniform
  // when the acceptance region is a tiny part of the image.
  constexpr int kMaxTries = 256;
  for (int t = 0; t < kMaxTries; ++t) {
    const int bx = static_cast<int>(rng.index(static_cast<std::uint64_t>(range_x)));
    const int by = static_cast<int>(rng.index(static_cast<std::uint64_t>(range_y)));
    if (accepts(bx, by)) return make_crop_pair(a, Rect{bx, by, crop_size, crop_size});
  }
  std::vector<std::pair<int, int>> valid;
  for (int by = std::max(0, a.y0 - crop_size); by <= std::min(range_y - 1, a.y0 + crop_size); ++by) {
    for (int bx = std::max(0, a.x0 - crop_size); bx <= std::min(range_x - 1, a.x0 + crop_size); ++bx) {
      if (accepts(bx, by)) valid.emplace_back(bx, by);
    }
  }
  // crop_b == crop_a always overlaps fully, so valid is never empty.
  const auto [bx, by] = valid[static_cast<std::size_t>(rng.index(valid.size()))];
  return make_crop_pair(a, Rect{bx, by, crop_size, crop_size});
}

std::vector<PixelPair> paired_pixel_indices(const CropPair& pair, int stride) {
  if (stride < 1) throw ArgumentError("paired_pixel_indices: stride must be >= 1");
  const Rect& oa = pair.overlap_in_a;
  const Rect& ob = pair.overlap_in_b;
  if (oa.w != ob.w || oa.h != ob.h) throw ArgumentError("paired_pixel_indices: overlap extents differ");
  const int rows = oa.h / stride;
  const int cols = oa.w / stride;
  std::vector<PixelPair> out;
  if (rows <= 0 || cols <= 0) return out;
  const int grid_w_a = grid_extent(pair.crop_a.w, stride);
  const int grid_w_b = grid_extent(pair.crop_b.w, stride);
  out.reserve(static_cast<std::size_t>(rows) * cols);
  const int half = stride / 2;
  for (int r = 0; r < rows; ++r) {
    const int ya = oa.y0 + r * stride + half;
    const int yb = ob.y0 + r * stride + half;
    for (int c = 0; c < cols; ++c) {
      const int xa = oa.x0 + c * stride + half;
      const int xb = ob.x0 + c * stride + half;
      out.push_back(PixelPair{(ya / stride) * grid_w_a + xa / stride, (yb / stride) * grid_w_b + xb / stride});
    }
  }
  return out;
}

}  // namespace crseg
