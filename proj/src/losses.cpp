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

#include "crseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "crseg/errors.hpp"

namespace crseg {

int confidence_indicator(double conf_a, double conf_b, double alpha_conf) {
  return (alpha_conf < conf_a && conf_a < conf_b) ? 1 : 0;
}

namespace {

constexpr double kUnitTolerance = 1e-5;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_unit_rows(const EmbeddingMatrix& m, const char* what) {
  if (m.values.size() != m.rows * m.dim) {
    throw ArgumentError(std::string("contrastive_loss: ") + what + " storage does not match its shape");
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double norm = std::sqrt(dot(m.row(i), m.row(i)));
    if (std::abs(norm - 1.0) > kUnitTolerance) {
      throw ArgumentError(std::string("contrastive_loss: ") + what + " row " + std::to_string(i) +
                          " has norm " + std::to_string(norm));
    }
  }
}

void check_batch(const ContrastiveBatch& b) {
  const std::size_t n = b.emb_a.rows;
  const std::size_t d = b.emb_a.dim;
  if (b.emb_b.rows != n || b.emb_b.dim != d || b.neg_bank.dim != d) {
    throw ArgumentError("contrastive_loss: embedding shapes disagree");
  }
  if (b.neg_bank.rows < 1) throw ArgumentError("contrastive_loss: negative bank is empty");
  if (b.conf_a.size() != n || b.conf_b.size() != n) {
    throw ArgumentError("contrastive_loss: confidence vectors must have one entry per pair");
  }
  if (!b.excluded_negative.empty() && b.excluded_negative.size() != n) {
    throw ArgumentError("contrastive_loss: excluded_negative must be empty or one entry per pair");
  }
  for (std::int64_t e : b.excluded_negative) {
    if (e < -1 || e >= static_cast<std::int64_t>(b.neg_bank.rows)) {
      throw ArgumentError("contrastive_loss: excluded_negative index out of range");
    }
  }
  if (!(b.tau > 0.0)) throw ArgumentError("contrastive_loss: tau must be positive");
  if (!(b.alpha_conf >= 0.0 && b.alpha_conf < 1.0)) {
    throw ArgumentError("contrastive_loss: alpha_conf must be in [0, 1)");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(b.conf_a[i] >= 0.0 && b.conf_a[i] <= 1.0 && b.conf_b[i] >= 0.0 && b.conf_b[i] <= 1.0)) {
      throw ArgumentError("contrastive_loss: confidence outside [0, 1]");
    }
  }
  check_unit_rows(b.emb_a, "emb_a");
  check_unit_rows(b.emb_b, "emb_b");
  check_unit_rows(b.neg_bank, "neg_bank");
}

ContrastiveResult evaluate_contrastive(const ContrastiveBatch& b, bool with_grad) {
  check_batch(b);
  const std::size_t n = b.emb_a.rows;
  const std::size_t d = b.emb_a.dim;
  const std::size_t k = b.neg_bank.rows;
  ContrastiveResult result;
  if (with_grad) {
    result.grad_emb_a = EmbeddingMatrix(n, d);
    result.grad_neg_bank = EmbeddingMatrix(k, d);
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (confidence_indicator(b.conf_a[i], b.conf_b[i], b.alpha_conf)) active.push_back(i);
  }
  result.active_pairs = active.size();
  if (active.empty()) return result;

  const double inv_tau = 1.0 / b.tau;
  const double inv_n = 1.0 / static_cast<double>(active.size());
  std::vector<double> logits(k);
  std::vector<double> probs(k);
  double total = 0.0;
  for (std::size_t i : active) {
    const auto anchor = b.emb_a.row(i);
    const auto target = b.emb_b.row(i);
    const std::int64_t skip = b.excluded_negative.empty() ? -1 : b.excluded_negative[i];
    const double pos = dot(anchor, target) * inv_tau;
    double top = b.positive_in_denominator ? pos : -std::numeric_limits<double>::infinity();
    bool any_negative = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<std::int64_t>(j) == skip) continue;
      logits[j] = dot(anchor, b.neg_bank.row(j)) * inv_tau;
      top = std::max(top, logits[j]);
      any_negative = true;
    }
    if (!b.positive_in_denominator && !any_negative) {
      throw ArgumentError("contrastive_loss: pair has no negatives left for the denominator");
    }
    double z = b.positive_in_denominator ? std::exp(pos - top) : 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<std::int64_t>(j) == skip) continue;
      probs[j] = std::exp(logits[j] - top);
      z += probs[j];
    }
    total += -pos + top + std::log(z);
    if (!with_grad) continue;

    // d/d anchor = (-target + sum_j p_j v_j) / tau
    auto ga = result.grad_emb_a.row(i);
    const double p_pos = b.positive_in_denominator ? std::exp(pos - top) / z : 0.0;
    const double scale = inv_n * inv_tau;
    for (std::size_t c = 0; c < d; ++c) ga[c] += scale * (p_pos - 1.0) * target[c];
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<std::int64_t>(j) == skip) continue;
      const double p = probs[j] / z;
      const auto neg = b.neg_bank.row(j);
      auto gn = result.grad_neg_bank.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        ga[c] += scale * p * neg[c];
        gn[c] += scale * p * anchor[c];
      }
    }
  }
  result.loss = total * inv_n;
  return result;
}

void check_pair(std::span<const double> pred, std::span<const double> gt, const char* who) {
  if (pred.size() != gt.size()) throw ArgumentError(std::string(who) + ": shape mismatch");
}

}  // namespace

double contrastive_loss(const ContrastiveBatch& batch) { return evaluate_contrastive(batch, false).loss; }

ContrastiveResult contrastive_loss_grad(const ContrastiveBatch& batch) {
  return evaluate_contrastive(batch, true);
}

ClassWeights balance_class_weights(std::span<const double> gt, ClassWeighting weighting) {
  if (weighting == ClassWeighting::uniform) return {1.0, 1.0};
  double fg = 0.0;
  for (double g : gt) fg += g;
  const auto n = static_cast<double>(gt.size());
  const double lf = n > 0 ? fg / n : 0.0;
  const double lb = n > 0 ? (n - fg) / n : 0.0;
  return weighting == ClassWeighting::as_printed ? ClassWeights{lf, lb} : ClassWeights{lb, lf};
}

namespace {

LossWithGrad evaluate_balance(std::span<const double> pred, std::span<const double> gt,
                              const BalanceOptions& o, bool with_grad) {
  check_pair(pred, gt, "balance_loss");
  if (!(o.alpha_exp >= 0.0)) throw ArgumentError("balance_loss: alpha_exp must be >= 0");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] != 0.0 && gt[i] != 1.0) throw ArgumentError("balance_loss: ground truth must be binary");
    if (!(pred[i] >= 0.0 && pred[i] <= 1.0)) throw ArgumentError("balance_loss: prediction outside [0, 1]");
  }
  LossWithGrad out;
  if (gt.empty()) return out;
  const ClassWeights w = balance_class_weights(gt, o.weighting);
  const double a = o.alpha_exp;
  const double inv_n = 1.0 / static_cast<double>(gt.size());
  // d/dx x^a, taken as 0 at x = 0 (exact for a > 1 and a = 0).
  const auto dpow = [a](double x) {
    if (a == 0.0) return 0.0;
    if (x <= 0.0) return a == 1.0 ? 1.0 : 0.0;
    return a * std::pow(x, a - 1.0);
  };
  if (with_grad) out.grad.assign(gt.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double b = pred[i];
    if (gt[i] == 1.0) {
      const double lg = std::log(b + o.eps);
      sum += w.foreground * std::pow(1.0 - b, a) * lg;
      if (with_grad) {
        out.grad[i] = -inv_n * w.foreground * (-dpow(1.0 - b) * lg + std::pow(1.0 - b, a) / (b + o.eps));
      }
    } else {
      const double lg = std::log(1.0 - b + o.eps);
      sum += w.background * std::pow(b, a) * lg;
      if (with_grad) {
        out.grad[i] = -inv_n * w.background * (dpow(b) * lg - std::pow(b, a) / (1.0 - b + o.eps));
      }
    }
  }
  out.loss = -sum * inv_n;
  return out;
}

}  // namespace

double balance_loss(std::span<const double> pred, std::span<const double> gt, const BalanceOptions& options) {
  return evaluate_balance(pred, gt, options, false).loss;
}

LossWithGrad balance_loss_grad(std::span<const double> pred, std::span<const double> gt,
                               const BalanceOptions& options) {
  return evaluate_balance(pred, gt, options, true);
}

double construction_loss(std::span<const double> pred, std::span<const double> gt, Reduction reduction) {
  check_pair(pred, gt, "construction_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    s += d * d;
  }
  if (reduction == Reduction::mean && !pred.empty()) s /= static_cast<double>(pred.size());
  return s;
}

LossWithGrad construction_loss_grad(std::span<const double> pred, std::span<const double> gt,
                                    Reduction reduction) {
  LossWithGrad out;
  out.loss = construction_loss(pred, gt, reduction);
  const double scale = (reduction == Reduction::mean && !pred.empty()) ? 2.0 / static_cast<double>(pred.size()) : 2.0;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] = scale * (pred[i] - gt[i]);
  return out;
}

double weight_decay_loss(std::span<const std::span<const float>> params, double lambda_wd) {
  if (!(lambda_wd >= 0.0)) throw ArgumentError("weight_decay_loss: lambda must be >= 0");
  double s = 0.0;
  for (const auto& p : params) {
    for (float v : p) s += static_cast<double>(v) * v;
  }
  return 0.5 * lambda_wd * s;
}

LossBreakdown total_loss(std::span<const StageTerms> stage_terms, double construction, double weight_decay) {
  if (stage_terms.empty()) throw ArgumentError("total_loss: at least one stage is required");
  LossBreakdown out;
  out.construction = construction;
  out.weight_decay = weight_decay;
  out.per_stage.assign(stage_terms.begin(), stage_terms.end());
  for (const auto& t : stage_terms) {
    out.contrast += t.contrast;
    out.balance += t.balance;
  }
  out.total = construction + weight_decay + out.contrast + out.balance;
  return out;
}

}  // namespace crseg
