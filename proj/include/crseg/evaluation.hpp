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
#include <iosfwd>
#include <span>
#include <vector>

#include "crseg/data_model.hpp"

namespace crseg {

class CRSeg;

struct ThresholdScore {
  double threshold = 0.0;
  double iou_fg = 0.0;
  double iou_bg = 0.0;
  double miou = 0.0;
};

struct EvalReport {
  std::vector<ThresholdScore> per_threshold;
  double best_threshold = 0.0;
  double best_miou = 0.0;
};

// |pred ∩ gt| / |pred ∪ gt| over pixels of class_id (0 or 1); 1.0 when the
// union is empty. Throws ArgumentError on shape mismatch.
[[nodiscard]] double iou(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask, int class_id);

// 0.05, 0.10, ..., 0.95.
[[nodiscard]] std::vector<double> default_thresholds();

// Accumulates per-threshold intersection and union counts over many images;
// IOUs are formed from the global counts.
class ThresholdSweep {
 public:
  // Throws ArgumentError unless thresholds are non-empty, strictly increasing
  // and inside (0, 1).
  explicit ThresholdSweep(std::vector<double> thresholds);

  void add(std::span<const float> prob, std::span<const std::uint8_t> gt);
  [[nodiscard]] EvalReport report() const;

 private:
  struct Counts {
    std::uint64_t inter_fg = 0;
    std::uint64_t union_fg = 0;
    std::uint64_t inter_bg = 0;
    std::uint64_t union_bg = 0;
  };
  std::vector<double> thresholds_;
  std::vector<Counts> counts_;
};

// Binarizes prob >= t for every threshold; best_threshold is the first
// (smallest) threshold reaching the maximum miou.
[[nodiscard]] EvalReport threshold_sweep(std::span<const float> prob, std::span<const std::uint8_t> gt,
                                         const std::vector<double>& thresholds);

// Fused-output sweep over every labeled sample, full images.
[[nodiscard]] EvalReport evaluate_model(const CRSeg& model, std::span<const ImageSample> samples,
                                        const std::vector<double>& thresholds = default_thresholds());

// CSV "threshold,iou_fg,iou_bg,miou" and the one-line "best_threshold,best_miou"
// summary (header line then values).
void write_report_csv(std::ostream& out, const EvalReport& report);
void write_report_summary(std::ostream& out, const EvalReport& report);

}  // namespace crseg
