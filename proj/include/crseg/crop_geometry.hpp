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

#pragma once

#include <vector>

#include "crseg/random.hpp"

namespace crseg {

struct Rect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  [[nodiscard]] long long area() const { return static_cast<long long>(w) * h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Two equal-size crops of one image. The overlap rectangles have identical
// extents and map back to the same image-frame rectangle, crop_a ∩ crop_b.
struct CropPair {
  Rect crop_a;        // image frame
  Rect crop_b;        // image frame
  Rect overlap_in_a;  // crop-a frame
  Rect overlap_in_b;  // crop-b frame

  [[nodiscard]] CropPair swapped() const { return {crop_b, crop_a, overlap_in_b, overlap_in_a}; }
};

// Intersection of two image-frame rectangles; w or h is 0 when disjoint.
[[nodiscard]] Rect intersect(const Rect& a, const Rect& b);

// Builds the pair for two given crop positions.
[[nodiscard]] CropPair make_crop_pair(const Rect& crop_a, const Rect& crop_b);

// crop_a is uniform over all valid positions; crop_b is uniform over the
// positions whose overlap with crop_a covers at least min_overlap_fraction of
// the crop area. Throws ArgumentError if the crop does not fit or the overlap
// requirement is unsatisfiable.
[[nodiscard]] CropPair sample_crop_pair(int image_h, int image_w, int crop_size,
                                        double min_overlap_fraction, Rng& rng);

struct PixelPair {
  int index_a;  // row-major index in crop a's feature grid
  int index_b;  // row-major index in crop b's feature grid
  friend bool operator==(const PixelPair&, const PixelPair&) = default;
  friend auto operator<=>(const PixelPair&, const PixelPair&) = default;
};

// Size of a feature grid at the given stride: ceil(extent / stride).
[[nodiscard]] inline int grid_extent(int extent, int stride) { return (extent + stride - 1) / stride; }

// Correspondences between the two crops' feature grids at a downsampling
// stride. The overlap is tiled into floor(h / stride) x floor(w / stride)
// cells; for each cell the image pixel at its center is located in both crops
// and the feature cells containing it are paired. Returns an empty list when
// the overlap is smaller than one cell.
[[nodiscard]] std::vector<PixelPair> paired_pixel_indices(const CropPair& pair, int stride);

}  // namespace crseg
