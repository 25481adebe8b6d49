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

#include "crseg/evaluation.hpp"

#include <iomanip>
#include <ostream>

#include "crseg/errors.hpp"
#include "crseg/network.hpp"

namespace crseg {

double iou(std::span<const std::uint8_t> pred_mask, std::span<const std::uint8_t> gt_mask, int class_id) {
  if (pred_mask.size() != gt_mask.size()) throw ArgumentError("iou: shape mismatch");
  if (class_id != 0 && class_id != 1) throw ArgumentError("iou: class_id must be 0 or 1");
  const auto cls = static_cast<std::uint8_t>(class_id);
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool p = (pred_mask[i] != 0) == (cls != 0);
    const bool g = (gt_mask[i] != 0) == (cls != 0);
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 19; ++k) t.push_back(k / 20.0);
  return t;
}

ThresholdSweep::ThresholdSweep(std::vector<double> thresholds) : thresholds_(std::move(thresholds)) {
  if (thresholds_.empty()) throw ArgumentError("threshold sweep: no thresholds");
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!(thresholds_[i] > 0.0 && thresholds_[i] < 1.0)) {
      throw ArgumentError("threshold sweep: thresholds must lie in (0, 1)");
    }
    if (i > 0 && !(thresholds_[i] > thresholds_[i - 1])) {
      throw ArgumentError("threshold sweep: thresholds must be strictly increasing");
    }
  }
  counts_.resize(thresholds_.size());
}

void ThresholdSweep::add(std::span<const float> prob, std::span<const std::uint8_t> gt) {
  if (prob.size() != gt.size()) throw ArgumentError("threshold sweep: shape mismatch");
  for (std::size_t t = 0; t < thresholds_.size(); ++t) {
    const double th = thresholds_[t];
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
      const bool p = prob[i] >= th;
      const bool g = gt[i] != 0;
      tp += (p && g);
      fp += (p && !g);
      fn += (!p && g);
      tn += (!p && !g);
    }
    Counts& c = counts_[t];
    c.inter_fg += tp;
    c.union_fg += tp + fp + fn;
    c.inter_bg += tn;
    c.union_bg += tn + fp + fn;
  }
}

EvalReport ThresholdSweep::report() const {
  EvalReport r;
  bool first = true;
  for (std::size_t t = 0; t < thresholds_.size(); ++t) {
    const Counts& c = counts_[t];
    ThresholdScore s;
    s.threshold = thresholds_[t];
    s.iou_fg = c.union_fg == 0 ? 1.0 : static_cast<double>(c.inter_fg) / static_cast<double>(c.union_fg);
    s.iou_bg = c.union_bg == 0 ? 1.0 : static_cast<double>(c.inter_bg) / static_cast<double>(c.union_bg);
    s.miou = 0.5 * (s.iou_fg + s.iou_bg);
    if (first || s.miou > r.best_miou) {
      r.best_miou = s.miou;
      r.best_threshold = s.threshold;
      first = false;
    }
    r.per_threshold.push_back(s);
  }
  return r;
}

EvalReport threshold_sweep(std::span<const float> prob, std::span<const std::uint8_t> gt,
                           const std::vector<double>& thresholds) {
  ThresholdSweep sweep(thresholds);
  sweep.add(prob, gt);
  return sweep.report();
}

EvalReport evaluate_model(const CRSeg& model, std::span<const ImageSample> samples,
                          const std::vector<double>& thresholds) {
  ThresholdSweep sweep(thresholds);
  for (const auto& s : samples) {
    if (!s.mask) continue;
    const StageOutputs out = model.forward(s.image);
    sweep.add(out.fused_prob.span(), s.mask->data);
  }
  return sweep.report();
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "threshold,iou_fg,iou_bg,miou\n" << std::setprecision(10);
  for (const auto& s : report.per_threshold) {
    out << s.threshold << ',' << s.iou_fg << ',' << s.iou_bg << ',' << s.miou << '\n';
  }
}

void write_report_summary(std::ostream& out, const EvalReport& report) {
  out << "best_threshold,best_miou\n" << std::setprecision(10) << report.best_threshold << ',' << report.best_miou
      << '\n';
}

}  // namespace crseg
