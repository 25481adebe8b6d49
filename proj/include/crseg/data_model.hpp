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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crseg/tensor.hpp"

namespace crseg {

// Binary H x W map; values are 0 or 1.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  [[nodiscard]] std::uint8_t at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] std::size_t count() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

// One training image. labeled is true exactly when mask is present. Road
// samples also carry "edge" and "centerline" targets in extra_masks.
struct ImageSample {
  std::string id;
  Tensor image;  // (C, H, W), values in [0, 1]
  std::optional<Mask> mask;
  bool labeled = false;
  std::map<std::string, Mask> extra_masks;

  // Throws ArgumentError if any invariant is broken.
  void validate() const;
};

struct DatasetSplit {
  std::vector<std::string> labeled_ids;
  std::vector<std::string> unlabeled_ids;
  double label_fraction = 1.0;
  std::uint64_t seed = 0;
};

enum class SynthTask { crack, road };

struct SynthConfig {
  int image_size = 128;
  double foreground_fraction_target = 0.02;
  SynthTask task = SynthTask::crack;
  int n_images = 0;
  double noise_level = 0.05;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

[[nodiscard]] std::string to_string(SynthTask task);
[[nodiscard]] SynthTask parse_task(const std::string& name);

// Deterministic synthetic crack or road images, all labeled. Sample i is a
// pure function of (cfg, i).
[[nodiscard]] std::vector<ImageSample> generate_synthetic_dataset(const SynthConfig& cfg);

// Seeded uniform draw of max(1, round(label_fraction * n)) labeled ids; both
// output lists keep the input order.
[[nodiscard]] DatasetSplit make_split(std::span<const std::string> ids, double label_fraction,
                                      std::uint64_t seed);

// Layout: root/images/<id>.png, root/masks/<id>.png, root/manifest.tsv
// (header "id\tlabeled", then one row per sample). Road extras go to
// root/edges and root/centerlines.
void save_dataset(std::span<const ImageSample> samples, const std::filesystem::path& root);
// Throws FormatError on missing masks for labeled rows or shape mismatch.
[[nodiscard]] std::vector<ImageSample> load_dataset(const std::filesystem::path& root);

// Road targets derived from a surface mask.
[[nodiscard]] Mask boundary_mask(const Mask& surface);

// Mean of mask.count() / area over the labeled samples.
[[nodiscard]] double mean_foreground_fraction(std::span<const ImageSample> samples);

// Samples whose id is in ids, in the order of ids. Throws ArgumentError on an
// unknown id.
[[nodiscard]] std::vector<const ImageSample*> select(std::span<const ImageSample> samples,
                                                     std::span<const std::string> ids);

}  // namespace crseg
