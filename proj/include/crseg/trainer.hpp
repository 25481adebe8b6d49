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

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crseg/config.hpp"
#include "crseg/data_model.hpp"
#include "crseg/losses.hpp"
#include "crseg/network.hpp"

namespace crseg {

enum class TrainMode { semi, sup_only };

struct TrainConfig {
  int epochs = 200;
  double lr0 = 1e-3;
  int lr_drop_every = 40;
  double lr_drop_factor = 5.0;
  double momentum = 0.9;
  double lambda_wd = 2e-4;
  int batch_labeled = 4;
  int batch_unlabeled = 4;
  int crop_size = 64;
  double min_overlap_fraction = 0.25;
  double tau = 0.1;
  double alpha_conf = 0.75;
  double alpha_exp = 2.0;
  std::array<bool, kStages> contrast_stages{true, true, true, true, true};
  TrainMode mode = TrainMode::semi;
  std::uint64_t seed = 0;

  int negatives = 64;  // negative bank size per anchor set
  ClassWeighting class_weighting = ClassWeighting::as_printed;
  bool positive_in_denominator = true;
  Reduction construction_reduction = Reduction::mean;
  double eps = 1e-7;
  bool full_image_labeled = false;
  int steps_per_epoch = 0;  // 0: one pass over the labeled ids
  int val_every = 1;        // epochs between validation runs; 0 disables

  // Per-crop photometric jitter on the unlabeled pair: each crop gets
  // x -> (1 + u) x + v with u, v uniform in [-crop_jitter, crop_jitter].
  double crop_jitter = 0.0;

  // Loss term multipliers, 1.0 for the plain sum.
  double w_contrast = 1.0;
  double w_balance = 1.0;
  double w_construction = 1.0;
  double w_weight_decay = 1.0;

  // Throws ConfigError.
  void validate() const;
  // Sets one field from its config-file key; returns false for unknown keys.
  bool set(const std::string& key, const std::string& value);
  [[nodiscard]] KeyValues to_key_values() const;

  [[nodiscard]] double learning_rate(int epoch) const;
};

[[nodiscard]] std::string to_string(TrainMode mode);

struct StepRecord {
  int step = 0;
  int epoch = 0;
  LossBreakdown losses;
  double lr = 0.0;
};

struct ValidationRecord {
  int epoch = 0;
  double best_threshold = 0.0;
  double best_miou = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validation;
  std::vector<double> lr_trace;  // one entry per epoch
};

struct TrainHooks {
  std::function<void(int epoch, const CRSeg& model, const TrainLog& log)> on_epoch_end;
};

// Maximum class probability of a two-class sigmoid output: max(p, 1 - p).
[[nodiscard]] inline double confidence(double p) { return p > 0.5 ? p : 1.0 - p; }
[[nodiscard]] double confidence_at(const Tensor& fused_prob, int index);

// Semi-supervised training. Labeled branch: balance loss on every side output
// and the fused output plus construction loss on the fused output. Unlabeled
// branch (semi mode): overlapping crop pairs, directional contrastive loss per
// active stage in both directions. Explicit weight decay, SGD with momentum
// and a step learning-rate schedule. Deterministic for a given config.
// Throws ConfigError on an unusable split.
TrainLog train(CRSeg& model, std::span<const ImageSample> dataset, const DatasetSplit& split,
               const TrainConfig& cfg, std::span<const ImageSample> validation = {},
               const TrainHooks& hooks = {});

[[nodiscard]] Tensor crop_image(const Tensor& image, int x0, int y0, int w, int h);
[[nodiscard]] Mask crop_mask(const Mask& mask, int x0, int y0, int w, int h);

// "step,epoch,contrast,balance,construction,weight_decay,total,lr"
void write_train_log_csv(std::ostream& out, const TrainLog& log);
// "epoch,best_threshold,best_miou"
void write_validation_csv(std::ostream& out, const TrainLog& log);
// Reads what write_train_log_csv wrote (per-stage terms are not stored).
// Throws FormatError.
[[nodiscard]] std::vector<StepRecord> read_train_log_csv(std::istream& in);
[[nodiscard]] std::vector<ValidationRecord> read_validation_csv(std::istream& in);

}  // namespace crseg
