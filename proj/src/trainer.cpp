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

#include "crseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "crseg/crop_geometry.hpp"
#include "crseg/errors.hpp"
#include "crseg/evaluation.hpp"
#include "crseg/random.hpp"

namespace crseg {

std::string to_string(TrainMode mode) { return mode == TrainMode::semi ? "semi" : "sup_only"; }

namespace {

std::string stages_to_string(const std::array<bool, kStages>& stages) {
  std::string s;
  for (int m = 0; m < kStages; ++m) {
    if (!stages[static_cast<std::size_t>(m)]) continue;
    if (!s.empty()) s += ',';
    s += std::to_string(m + 1);
  }
  return s.empty() ? "none" : s;
}

std::array<bool, kStages> parse_stages(const std::string& key, const std::string& value) {
  std::array<bool, kStages> out{};
  if (value == "none") return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long m = parse_int(key, item);
    if (m < 1 || m > kStages) throw ConfigError("'" + key + "' entries must be in 1..5");
    out[static_cast<std::size_t>(m - 1)] = true;
  }
  return out;
}

std::string weighting_to_string(ClassWeighting w) {
  switch (w) {
    case ClassWeighting::as_printed: return "as_printed";
    case ClassWeighting::inverse_frequency: return "inverse_frequency";
    case ClassWeighting::uniform: return "uniform";
  }
  return "as_printed";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
  if (lr_drop_every < 1) throw ConfigError("lr_drop_every must be >= 1");
  if (!(lr_drop_factor > 1.0)) throw ConfigError("lr_drop_factor must be > 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(lambda_wd >= 0.0)) throw ConfigError("lambda_wd must be >= 0");
  if (batch_labeled < 1) throw ConfigError("batch_labeled must be >= 1");
  if (batch_unlabeled < 1) throw ConfigError("batch_unlabeled must be >= 1");
  if (crop_size < 16) throw ConfigError("crop_size must be >= 16");
  if (!(min_overlap_fraction > 0.0 && min_overlap_fraction <= 1.0)) {
    throw ConfigError("min_overlap_fraction must be in (0, 1]");
  }
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(alpha_conf >= 0.0 && alpha_conf < 1.0)) throw ConfigError("alpha_conf must be in [0, 1)");
  if (!(alpha_exp >= 0.0)) throw ConfigError("alpha_exp must be >= 0");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  if (val_every < 0) throw ConfigError("val_every must be >= 0");
  if (!(crop_jitter >= 0.0 && crop_jitter < 1.0)) throw ConfigError("crop_jitter must be in [0, 1)");
  for (double w : {w_contrast, w_balance, w_construction, w_weight_decay}) {
    if (!(w >= 0.0)) throw ConfigError("loss multipliers must be >= 0");
  }
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  const auto to_int = [&] { return static_cast<int>(parse_int(key, value)); };
  if (key == "epochs") epochs = to_int();
  else if (key == "lr0") lr0 = parse_double(key, value);
  else if (key == "lr_drop_every") lr_drop_every = to_int();
  else if (key == "lr_drop_factor") lr_drop_factor = parse_double(key, value);
  else if (key == "momentum") momentum = parse_double(key, value);
  else if (key == "lambda_wd") lambda_wd = parse_double(key, value);
  else if (key == "batch_labeled") batch_labeled = to_int();
  else if (key == "batch_unlabeled") batch_unlabeled = to_int();
  else if (key == "crop_size") crop_size = to_int();
  else if (key == "min_overlap_fraction") min_overlap_fraction = parse_double(key, value);
  else if (key == "tau") tau = parse_double(key, value);
  else if (key == "alpha_conf") alpha_conf = parse_double(key, value);
  else if (key == "alpha_exp") alpha_exp = parse_double(key, value);
  else if (key == "contrast_stages") contrast_stages = parse_stages(key, value);
  else if (key == "mode") {
    if (value == "semi") mode = TrainMode::semi;
    else if (value == "sup_only") mode = TrainMode::sup_only;
    else throw ConfigError("'mode' must be semi or sup_only");
  } else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "negatives") negatives = to_int();
  else if (key == "class_weighting") {
    if (value == "as_printed") class_weighting = ClassWeighting::as_printed;
    else if (value == "inverse_frequency") class_weighting = ClassWeighting::inverse_frequency;
    else if (value == "uniform") class_weighting = ClassWeighting::uniform;
    else throw ConfigError("'class_weighting' must be as_printed, inverse_frequency or uniform");
  } else if (key == "positive_in_denominator") positive_in_denominator = parse_bool(key, value);
  else if (key == "construction_reduction") {
    if (value == "mean") construction_reduction = Reduction::mean;
    else if (value == "sum") construction_reduction = Reduction::sum;
    else throw ConfigError("'construction_reduction' must be mean or sum");
  } else if (key == "eps") eps = parse_double(key, value);
  else if (key == "full_image_labeled") full_image_labeled = parse_bool(key, value);
  else if (key == "steps_per_epoch") steps_per_epoch = to_int();
  else if (key == "val_every") val_every = to_int();
  else if (key == "crop_jitter") crop_jitter = parse_double(key, value);
  else if (key == "w_contrast") w_contrast = parse_double(key, value);
  else if (key == "w_balance") w_balance = parse_double(key, value);
  else if (key == "w_construction") w_construction = parse_double(key, value);
  else if (key == "w_weight_decay") w_weight_decay = parse_double(key, value);
  else return false;
  return true;
}

KeyValues TrainConfig::to_key_values() const {
  return {{"epochs", std::to_string(epochs)},
          {"lr0", fmt(lr0)},
          {"lr_drop_every", std::to_string(lr_drop_every)},
          {"lr_drop_factor", fmt(lr_drop_factor)},
          {"momentum", fmt(momentum)},
          {"lambda_wd", fmt(lambda_wd)},
          {"batch_labeled", std::to_string(batch_labeled)},
          {"batch_unlabeled", std::to_string(batch_unlabeled)},
          {"crop_size", std::to_string(crop_size)},
          {"min_overlap_fraction", fmt(min_overlap_fraction)},
          {"tau", fmt(tau)},
          {"alpha_conf", fmt(alpha_conf)},
          {"alpha_exp", fmt(alpha_exp)},
          {"contrast_stages", stages_to_string(contrast_stages)},
          {"mode", to_string(mode)},
          {"seed", std::to_string(seed)},
          {"negatives", std::to_string(negatives)},
          {"class_weighting", weighting_to_string(class_weighting)},
          {"positive_in_denominator", positive_in_denominator ? "true" : "false"},
          {"construction_reduction", construction_reduction == Reduction::mean ? "mean" : "sum"},
          {"eps", fmt(eps)},
          {"full_image_labeled", full_image_labeled ? "true" : "false"},
          {"steps_per_epoch", std::to_string(steps_per_epoch)},
          {"val_every", std::to_string(val_every)},
          {"crop_jitter", fmt(crop_jitter)},
          {"w_contrast", fmt(w_contrast)},
          {"w_balance", fmt(w_balance)},
          {"w_construction", fmt(w_construction)},
          {"w_weight_decay", fmt(w_weight_decay)}};
}

double TrainConfig::learning_rate(int epoch) const {
  return lr0 / std::pow(lr_drop_factor, epoch / lr_drop_every);
}

double confidence_at(const Tensor& fused_prob, int index) {
  return confidence(static_cast<double>(fused_prob.data()[index]));
}

Tensor crop_image(const Tensor& image, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > image.width() || y0 + h > image.height()) {
    throw ArgumentError("crop_image: rectangle outside the image");
  }
  Tensor out(image.channels(), h, w);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      const float* src = &image.data()[(static_cast<std::size_t>(c) * image.height() + y0 + y) * image.width() + x0];
      std::copy(src, src + w, &out.at(c, y, 0));
    }
  }
  return out;
}

Mask crop_mask(const Mask& mask, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > mask.width || y0 + h > mask.height) {
    throw ArgumentError("crop_mask: rectangle outside the mask");
  }
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(y, x) = mask.at(y0 + y, x0 + x);
  }
  return out;
}

namespace {

// Stream labels for Rng::derive.
enum Stream : std::uint64_t { kLabeledOrder = 1, kLabeledCrop = 2, kUnlabeled = 3 };

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

Tensor to_float_tensor(const std::vector<double>& v, double scale, Dims dims) {
  Tensor t(dims);
  for (std::size_t i = 0; i < v.size(); ++i) t.data()[i] = static_cast<float>(scale * v[i]);
  return t;
}

class Trainer {
 public:
  Trainer(CRSeg& model, const TrainConfig& cfg) : model_(model), cfg_(cfg) {
    for (const auto& p : model_.parameters()) velocity_.emplace_back(p.value.size(), 0.0f);
  }

  // Labeled branch for one image; fills the stage balance terms and the
  // construction term (already divided by the batch size).
  void labeled_step(const ImageSample& s, Rng& rng, std::vector<StageTerms>& stages, double& construction) {
    const int h = s.image.height();
    const int w = s.image.width();
    Tensor image = s.image;
    Mask gt_mask = *s.mask;
    if (!cfg_.full_image_labeled && (cfg_.crop_size < h || cfg_.crop_size < w)) {
      const int c = std::min({cfg_.crop_size, h, w});
      const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(w - c + 1)));
      const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(h - c + 1)));
      image = crop_image(s.image, x0, y0, c, c);
      gt_mask = crop_mask(*s.mask, x0, y0, c, c);
    }
    const std::vector<double> gt(gt_mask.data.begin(), gt_mask.data.end());
    const ForwardTrace trace = model_.forward_trace(image);
    const double scale = 1.0 / cfg_.batch_labeled;
    const BalanceOptions bo{cfg_.alpha_exp, cfg_.eps, cfg_.class_weighting};
    OutputGrads grads;
    for (int m = 0; m < kStages; ++m) {
      const auto sm = static_cast<std::size_t>(m);
      const auto pred = to_double(trace.outputs.side_probs[sm].span());
      const LossWithGrad bal = balance_loss_grad(pred, gt, bo);
      stages[sm].balance += cfg_.w_balance * scale * bal.loss;
      grads.side_probs[sm] = to_float_tensor(bal.grad, cfg_.w_balance * scale, trace.outputs.side_probs[sm].dims());
    }
    const auto fused = to_double(trace.outputs.fused_prob.span());
    const LossWithGrad bal = balance_loss_grad(fused, gt, bo);
    const LossWithGrad con = construction_loss_grad(fused, gt, cfg_.construction_reduction);
    stages[kStages].balance += cfg_.w_balance * scale * bal.loss;
    construction += cfg_.w_construction * scale * con.loss;
    std::vector<double> g(fused.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = cfg_.w_balance * bal.grad[i] + cfg_.w_construction * con.grad[i];
    grads.fused_prob = to_float_tensor(g, scale, trace.outputs.fused_prob.dims());
    model_.backward(trace, grads);
  }

  // Unlabeled branch for one image: crop pair, both contrast directions at
  // every active stage.
  void unlabeled_step(const ImageSample& s, Rng& rng, std::vector<StageTerms>& stages) {
    const int c = std::min({cfg_.crop_size, s.image.height(), s.image.width()});
    const CropPair pair = sample_crop_pair(s.image.height(), s.image.width(), c, cfg_.min_overlap_fraction, rng);
    Tensor img_a = crop_image(s.image, pair.crop_a.x0, pair.crop_a.y0, c, c);
    Tensor img_b = crop_image(s.image, pair.crop_b.x0, pair.crop_b.y0, c, c);
    if (cfg_.crop_jitter > 0.0) {
      for (Tensor* img : {&img_a, &img_b}) {
        const auto gain = static_cast<float>(1.0 + rng.uniform(-cfg_.crop_jitter, cfg_.crop_jitter));
        const auto shift = static_cast<float>(rng.uniform(-cfg_.crop_jitter, cfg_.crop_jitter));
        for (float& v : img->span()) v = gain * v + shift;
      }
    }
    const ForwardOptions opts{cfg_.contrast_stages};
    const ForwardTrace ta = model_.forward_trace(img_a, opts);
    const ForwardTrace tb = model_.forward_trace(img_b, opts);
    OutputGrads ga;
    OutputGrads gb;
    bool any = false;
    const double scale = cfg_.w_contrast / cfg_.batch_unlabeled;
    for (int m = 0; m < kStages; ++m) {
      const auto sm = static_cast<std::size_t>(m);
      if (!cfg_.contrast_stages[sm]) continue;
      const int stride = stage_stride(m);
      const auto pairs = paired_pixel_indices(pair, stride);
      if (pairs.empty()) continue;
      const EmbeddingMap& ea = ta.outputs.stage_embeddings[sm];
      const EmbeddingMap& eb = tb.outputs.stage_embeddings[sm];
      const auto conf_a = cell_confidence(ta.outputs.fused_prob, ea, stride);
      const auto conf_b = cell_confidence(tb.outputs.fused_prob, eb, stride);
      ga.stage_embeddings[sm].assign(ea.rows.size(), 0.0f);
      gb.stage_embeddings[sm].assign(eb.rows.size(), 0.0f);

      std::vector<int> idx_a(pairs.size());
      std::vector<int> idx_b(pairs.size());
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        idx_a[i] = pairs[i].index_a;
        idx_b[i] = pairs[i].index_b;
      }
      double loss = direction(ea, conf_a, idx_a, eb, conf_b, idx_b, rng, scale, ga.stage_embeddings[sm],
                              gb.stage_embeddings[sm]);
      loss += direction(eb, conf_b, idx_b, ea, conf_a, idx_a, rng, scale, gb.stage_embeddings[sm],
                        ga.stage_embeddings[sm]);
      stages[sm].contrast += scale * loss;
      any = true;
    }
    if (!any) return;
    model_.backward(ta, ga);
    model_.backward(tb, gb);
  }

  void apply_update(double lr, double& weight_decay) {
    std::vector<std::span<const float>> weights;
    for (const auto& p : model_.parameters()) {
      if (p.decay) weights.emplace_back(p.value);
    }
    weight_decay = cfg_.w_weight_decay * weight_decay_loss(weights, cfg_.lambda_wd);
    const auto wd = static_cast<float>(cfg_.w_weight_decay * cfg_.lambda_wd);
    const auto mu = static_cast<float>(cfg_.momentum);
    const auto step = static_cast<float>(lr);
    auto& params = model_.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = params[k];
      std::vector<float>& v = velocity_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i] + (p.decay ? wd * p.value[i] : 0.0f);
        v[i] = mu * v[i] + g;
        p.value[i] -= step * v[i];
      }
    }
  }

 private:
  // Confidence of each embedding cell, read from the fused map at the cell
  // center (nearest neighbour).
  static std::vector<double> cell_confidence(const Tensor& fused, const EmbeddingMap& e, int stride) {
    std::vector<double> out(static_cast<std::size_t>(e.height) * e.width);
    for (int y = 0; y < e.height; ++y) {
      const int py = std::min(y * stride + stride / 2, fused.height() - 1);
      for (int x = 0; x < e.width; ++x) {
        const int px = std::min(x * stride + stride / 2, fused.width() - 1);
        out[static_cast<std::size_t>(y) * e.width + x] = confidence_at(fused, py * fused.width() + px);
      }
    }
    return out;
  }

  // Anchor side `a` aligns to the frozen target side `b`; negatives come from
  // b's whole map. Returns the loss; gradients are scattered (times scale)
  // into the anchor map and the negatives' map.
  double direction(const EmbeddingMap& ea, const std::vector<double>& conf_a, const std::vector<int>& idx_a,
                   const EmbeddingMap& eb, const std::vector<double>& conf_b, const std::vector<int>& idx_b, Rng& rng,
                   double scale, std::vector<float>& grad_a, std::vector<float>& grad_b) const {
    const std::size_t n = idx_a.size();
    const auto d = static_cast<std::size_t>(ea.dim);
    ContrastiveBatch batch;
    batch.emb_a = EmbeddingMatrix(n, d);
    batch.emb_b = EmbeddingMatrix(n, d);
    batch.conf_a.resize(n);
    batch.conf_b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(ea.row(idx_a[i]), d, batch.emb_a.row(i).begin());
      std::copy_n(eb.row(idx_b[i]), d, batch.emb_b.row(i).begin());
      batch.conf_a[i] = conf_a[static_cast<std::size_t>(idx_a[i])];
      batch.conf_b[i] = conf_b[static_cast<std::size_t>(idx_b[i])];
    }

    // Uniform draw without replacement from b's cells.
    const std::size_t cells = static_cast<std::size_t>(eb.height) * eb.width;
    const std::size_t k = std::min(cells, static_cast<std::size_t>(cfg_.negatives));
    std::vector<int> pool(cells);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(cells - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<std::int64_t> bank_slot(cells, -1);
    batch.neg_bank = EmbeddingMatrix(k, d);
    for (std::size_t j = 0; j < k; ++j) {
      std::copy_n(eb.row(pool[j]), d, batch.neg_bank.row(j).begin());
      bank_slot[static_cast<std::size_t>(pool[j])] = static_cast<std::int64_t>(j);
    }
    batch.excluded_negative.resize(n);
    for (std::size_t i = 0; i < n; ++i) batch.excluded_negative[i] = bank_slot[static_cast<std::size_t>(idx_b[i])];
    batch.tau = cfg_.tau;
    batch.alpha_conf = cfg_.alpha_conf;
    batch.positive_in_denominator = cfg_.positive_in_denominator;

    // float embeddings normalized in float can sit a few ulps off unit norm;
    // renormalize in double before the strict check.
    for (EmbeddingMatrix* m : {&batch.emb_a, &batch.emb_b, &batch.neg_bank}) {
      for (std::size_t r = 0; r < m->rows; ++r) {
        auto row = m->row(r);
        double n2 = 0.0;
        for (double v : row) n2 += v * v;
        const double inv = 1.0 / std::sqrt(n2);
        for (double& v : row) v *= inv;
      }
    }

    const ContrastiveResult res = contrastive_loss_grad(batch);
    if (res.active_pairs == 0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      float* dst = grad_a.data() + static_cast<std::size_t>(idx_a[i]) * d;
      const auto src = res.grad_emb_a.row(i);
      for (std::size_t c = 0; c < d; ++c) dst[c] += static_cast<float>(scale * src[c]);
    }
    for (std::size_t j = 0; j < k; ++j) {
      float* dst = grad_b.data() + static_cast<std::size_t>(pool[j]) * d;
      const auto src = res.grad_neg_bank.row(j);
      for (std::size_t c = 0; c < d; ++c) dst[c] += static_cast<float>(scale * src[c]);
    }
    return res.loss;
  }

  CRSeg& model_;
  const TrainConfig& cfg_;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace

TrainLog train(CRSeg& model, std::span<const ImageSample> dataset, const DatasetSplit& split,
               const TrainConfig& cfg, std::span<const ImageSample> validation, const TrainHooks& hooks) {
  cfg.validate();
  if (split.labeled_ids.empty()) throw ConfigError("train: the split has no labeled images");
  if (cfg.mode == TrainMode::semi && split.unlabeled_ids.empty()) {
    throw ConfigError("train: semi mode needs unlabeled images");
  }
  std::vector<const ImageSample*> labeled;
  std::vector<const ImageSample*> unlabeled;
  try {
    labeled = select(dataset, split.labeled_ids);
    unlabeled = select(dataset, split.unlabeled_ids);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("train: split does not match the dataset: ") + e.what());
  }
  for (const ImageSample* s : labeled) {
    if (!s->mask) throw ConfigError("train: labeled id " + s->id + " has no mask");
  }

  const auto n_labeled = static_cast<int>(labeled.size());
  const int steps_per_epoch =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (n_labeled + cfg.batch_labeled - 1) / cfg.batch_labeled;
  const bool semi = cfg.mode == TrainMode::semi && cfg.w_contrast > 0.0;

  Trainer trainer(model, cfg);
  TrainLog log;
  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    log.lr_trace.push_back(lr);

    std::vector<int> order(static_cast<std::size_t>(n_labeled));
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng = Rng::derive(cfg.seed, {kLabeledOrder, static_cast<std::uint64_t>(epoch)});
    for (int i = n_labeled - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)], order[order_rng.index(static_cast<std::uint64_t>(i + 1))]);
    }

    for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
      model.zero_grad();
      std::vector<StageTerms> stages(kStages + 1);
      double construction = 0.0;
      Rng crop_rng = Rng::derive(cfg.seed, {kLabeledCrop, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step)});
      for (int b = 0; b < cfg.batch_labeled; ++b) {
        const int pick = order[static_cast<std::size_t>((step * cfg.batch_labeled + b) % n_labeled)];
        trainer.labeled_step(*labeled[static_cast<std::size_t>(pick)], crop_rng, stages, construction);
      }
      if (semi) {
        Rng u_rng = Rng::derive(cfg.seed, {kUnlabeled, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step)});
        for (int b = 0; b < cfg.batch_unlabeled; ++b) {
          const auto pick = static_cast<std::size_t>(u_rng.index(unlabeled.size()));
          trainer.unlabeled_step(*unlabeled[pick], u_rng, stages);
        }
      }
      double weight_decay = 0.0;
      trainer.apply_update(lr, weight_decay);
      log.steps.push_back(StepRecord{global_step, epoch, total_loss(stages, construction, weight_decay), lr});
    }

    if (!validation.empty() && cfg.val_every > 0 && (epoch + 1) % cfg.val_every == 0) {
      const EvalReport report = evaluate_model(model, validation);
      log.validation.push_back(ValidationRecord{epoch, report.best_threshold, report.best_miou});
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model, log);
  }
  return log;
}

void write_train_log_csv(std::ostream& out, const TrainLog& log) {
  out << "step,epoch,contrast,balance,construction,weight_decay,total,lr\n";
  out.precision(17);
  for (const auto& r : log.steps) {
    out << r.step << ',' << r.epoch << ',' << r.losses.contrast << ',' << r.losses.balance << ','
        << r.losses.construction << ',' << r.losses.weight_decay << ',' << r.losses.total << ',' << r.lr << '\n';
  }
}

void write_validation_csv(std::ostream& out, const TrainLog& log) {
  out << "epoch,best_threshold,best_miou\n";
  out.precision(17);
  for (const auto& v : log.validation) out << v.epoch << ',' << v.best_threshold << ',' << v.best_miou << '\n';
}

namespace {

std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV, expected header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw FormatError("unexpected CSV header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

double cell_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  throw FormatError("bad number '" + s + "' in CSV");
}

}  // namespace

std::vector<StepRecord> read_train_log_csv(std::istream& in) {
  std::vector<StepRecord> out;
  for (const auto& row : read_csv(in, "step,epoch,contrast,balance,construction,weight_decay,total,lr")) {
    if (row.size() != 8) throw FormatError("train log rows need 8 columns");
    StepRecord r;
    r.step = static_cast<int>(cell_double(row[0]));
    r.epoch = static_cast<int>(cell_double(row[1]));
    r.losses.contrast = cell_double(row[2]);
    r.losses.balance = cell_double(row[3]);
    r.losses.construction = cell_double(row[4]);
    r.losses.weight_decay = cell_double(row[5]);
    r.losses.total = cell_double(row[6]);
    r.lr = cell_double(row[7]);
    out.push_back(r);
  }
  return out;
}

std::vector<ValidationRecord> read_validation_csv(std::istream& in) {
  std::vector<ValidationRecord> out;
  for (const auto& row : read_csv(in, "epoch,best_threshold,best_miou")) {
    if (row.size() != 3) throw FormatError("validation rows need 3 columns");
    out.push_back(ValidationRecord{static_cast<int>(cell_double(row[0])), cell_double(row[1]), cell_double(row[2])});
  }
  return out;
}

}  // namespace crseg
