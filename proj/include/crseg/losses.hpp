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

// Training objectives. Every loss comes with an analytic gradient; all
// arithmetic is in double.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace crseg {

// Row-major rows x dim matrix of embeddings.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t d) : rows(r), dim(d), values(r * d, 0.0) {}

  [[nodiscard]] std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

// Positive pairs from the two crop contexts plus a shared negative bank.
// Row i of emb_a (anchor) is paired with row i of emb_b (target); the pair
// only contributes when alpha_conf < conf_a[i] < conf_b[i].
struct ContrastiveBatch {
  EmbeddingMatrix emb_a;
  EmbeddingMatrix emb_b;
  std::vector<double> conf_a;
  std::vector<double> conf_b;
  EmbeddingMatrix neg_bank;  // K x D, K >= 1
  // Optional, one entry per pair: index of a bank row that is the anchor's own
  // positive and must be left out of its denominator, or -1.
  std::vector<std::int64_t> excluded_negative;
  double tau = 0.1;
  double alpha_conf = 0.75;
  // Standard InfoNCE denominator (positive + negatives). When false, only the
  // negatives appear in the denominator.
  bool positive_in_denominator = true;
};

struct ContrastiveResult {
  double loss = 0.0;
  std::size_t active_pairs = 0;
  EmbeddingMatrix grad_emb_a;     // d loss / d emb_a
  EmbeddingMatrix grad_neg_bank;  // d loss / d neg_bank
  // emb_b is a stop-gradient target: it never receives a gradient.
};

// 1 iff alpha_conf < conf_a < conf_b.
[[nodiscard]] int confidence_indicator(double conf_a, double conf_b, double alpha_conf);

// Mean over gated-in pairs of -log softmax of the positive similarity at
// temperature tau; 0 when no pair is gated in. Throws ArgumentError when an
// embedding row is not unit length (tolerance 1e-5) or shapes disagree.
[[nodiscard]] double contrastive_loss(const ContrastiveBatch& batch);
[[nodiscard]] ContrastiveResult contrastive_loss_grad(const ContrastiveBatch& batch);

// Class weights of the balance loss. as_printed: lambda_fg = N_fg / N,
// lambda_bg = N_bg / N. inverse_frequency swaps them. uniform sets both to 1.
enum class ClassWeighting { as_printed, inverse_frequency, uniform };

struct BalanceOptions {
  double alpha_exp = 2.0;
  double eps = 1e-7;
  ClassWeighting weighting = ClassWeighting::as_printed;
};

struct LossWithGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

struct ClassWeights {
  double foreground = 0.0;
  double background = 0.0;
};

[[nodiscard]] ClassWeights balance_class_weights(std::span<const double> gt, ClassWeighting weighting);

// Class-weighted focal cross-entropy:
//   -(1/N) sum_i [ gt_i  * l_fg (1 - b_i)^a log(b_i + eps)
//               + (1 - gt_i) * l_bg  b_i^a    log(1 - b_i + eps) ]
[[nodiscard]] double balance_loss(std::span<const double> pred, std::span<const double> gt,
                                  const BalanceOptions& options = {});
[[nodiscard]] LossWithGrad balance_loss_grad(std::span<const double> pred, std::span<const double> gt,
                                             const BalanceOptions& options = {});

enum class Reduction { sum, mean };

// Squared error between prediction and target.
[[nodiscard]] double construction_loss(std::span<const double> pred, std::span<const double> gt,
                                       Reduction reduction = Reduction::mean);
[[nodiscard]] LossWithGrad construction_loss_grad(std::span<const double> pred, std::span<const double> gt,
                                                  Reduction reduction = Reduction::mean);

// (lambda / 2) * sum of squares over every entry of every array. Callers pass
// weight tensors only; biases are not decayed.
[[nodiscard]] double weight_decay_loss(std::span<const std::span<const float>> params, double lambda_wd);

struct StageTerms {
  double contrast = 0.0;
  double balance = 0.0;
};

struct LossBreakdown {
  double contrast = 0.0;
  double balance = 0.0;
  double construction = 0.0;
  double weight_decay = 0.0;
  double total = 0.0;
  std::vector<StageTerms> per_stage;
};

// total = construction + weight_decay + sum_m (contrast_m + balance_m).
// Throws ArgumentError on an empty stage list.
[[nodiscard]] LossBreakdown total_loss(std::span<const StageTerms> stage_terms, double construction,
                                       double weight_decay);

}  // namespace crseg
