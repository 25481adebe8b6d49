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

#include "crseg/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crseg/errors.hpp"
#include "crseg/kernels.hpp"
#include "crseg/random.hpp"

namespace crseg {

void CRSegConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (base_width < 8) throw ConfigError("base_width must be >= 8");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (std::accumulate(stage_convs.begin(), stage_convs.end(), 0) != 13 ||
      stage_convs != std::array<int, kStages>{2, 2, 3, 3, 3}) {
    throw ConfigError("stage_convs must be [2, 2, 3, 3, 3]");
  }
}

std::array<int, kStages> CRSegConfig::stage_widths() const {
  return {base_width, 2 * base_width, 4 * base_width, 8 * base_width, 8 * base_width};
}

std::size_t vgg_backbone_parameter_count(int in_channels, int base_width) {
  CRSegConfig cfg;
  cfg.in_channels = in_channels;
  cfg.base_width = base_width;
  const auto widths = cfg.stage_widths();
  std::size_t total = 0;
  int cin = in_channels;
  for (int m = 0; m < kStages; ++m) {
    for (int j = 0; j < cfg.stage_convs[static_cast<std::size_t>(m)]; ++j) {
      const auto cout = static_cast<std::size_t>(widths[static_cast<std::size_t>(m)]);
      total += 9 * static_cast<std::size_t>(cin) * cout + cout;
      cin = widths[static_cast<std::size_t>(m)];
    }
  }
  return total;
}

CRSeg::CRSeg(const CRSegConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.validate();
  const auto widths = config_.stage_widths();
  std::uint64_t stream = 0;
  int cin = config_.in_channels;
  for (int m = 0; m < kStages; ++m) {
    const int width = widths[static_cast<std::size_t>(m)];
    for (int j = 0; j < config_.stage_convs[static_cast<std::size_t>(m)]; ++j) {
      ConvRef ref{};
      add_conv("stage" + std::to_string(m + 1) + ".conv" + std::to_string(j + 1), cin, width, 3,
               std::sqrt(1.0 / (9.0 * cin)), ref, stream++);
      convs_[static_cast<std::size_t>(m)].push_back(ref);
      cin = width;
    }
  }
  for (int m = 0; m < kStages; ++m) {
    const int width = widths[static_cast<std::size_t>(m)];
    add_conv("side" + std::to_string(m + 1), width, 1, 1, std::sqrt(1.0 / width),
             side_[static_cast<std::size_t>(m)], stream++);
  }
  add_conv("fuse", kStages, 1, 1, std::sqrt(1.0 / kStages), fuse_, stream++);
  const int d = config_.embed_dim;
  for (int m = 0; m < kStages; ++m) {
    const int width = widths[static_cast<std::size_t>(m)];
    const std::string prefix = "proj" + std::to_string(m + 1);
    add_conv(prefix + ".fc1", width, d, 1, std::sqrt(1.0 / width), proj1_[static_cast<std::size_t>(m)], stream++);
    add_conv(prefix + ".fc2", d, d, 1, std::sqrt(1.0 / d), proj2_[static_cast<std::size_t>(m)], stream++);
  }
}

void CRSeg::add_conv(const std::string& name, int in_channels, int out_channels, int kernel,
                     double init_std, ConvRef& ref, std::uint64_t stream) {
  Parameter w;
  w.name = name + ".weight";
  w.shape = kernel == 1 ? std::vector<int>{out_channels, in_channels}
                        : std::vector<int>{out_channels, in_channels, kernel, kernel};
  w.value.resize(static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel);
  Rng rng = Rng::derive(seed_, {stream});
  for (float& v : w.value) v = static_cast<float>(init_std * rng.normal());
  w.grad.assign(w.value.size(), 0.0f);
  Parameter b;
  b.name = name + ".bias";
  b.shape = {out_channels};
  b.value.assign(static_cast<std::size_t>(out_channels), 0.0f);
  b.grad.assign(b.value.size(), 0.0f);
  b.decay = false;
  ref = ConvRef{static_cast<int>(params_.size()), static_cast<int>(params_.size() + 1), in_channels, out_channels};
  params_.push_back(std::move(w));
  params_.push_back(std::move(b));
}

Parameter& CRSeg::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ArgumentError("no parameter named '" + name + "'");
}

const Parameter& CRSeg::parameter(const std::string& name) const {
  return const_cast<CRSeg*>(this)->parameter(name);
}

std::size_t CRSeg::backbone_parameter_count() const {
  std::size_t total = 0;
  for (const auto& stage : convs_) {
    for (const auto& c : stage) {
      total += params_[static_cast<std::size_t>(c.weight)].value.size() + params_[static_cast<std::size_t>(c.bias)].value.size();
    }
  }
  return total;
}

std::size_t CRSeg::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void CRSeg::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
}

void CRSeg::run(const Tensor& image, const ForwardOptions& options, ForwardTrace& t, bool keep) const {
  if (image.channels() != config_.in_channels) {
    throw ArgumentError("forward: expected " + std::to_string(config_.in_channels) + " channels, got " +
                        std::to_string(image.channels()));
  }
  if (image.height() < 16 || image.width() < 16) {
    throw ArgumentError("forward: spatial size must be at least 16x16 for four poolings");
  }
  const int h = image.height();
  const int w = image.width();
  const auto& p = params_;
  const auto value = [&](int idx) { return std::span<const float>(p[static_cast<std::size_t>(idx)].value); };

  t.input = image.dims();
  t.side_logits_up = Tensor(kStages, h, w);
  t.stage_in[0] = image;
  for (int m = 0; m < kStages; ++m) {
    const auto sm = static_cast<std::size_t>(m);
    if (m > 0) {
      const Tensor& prev = t.conv_out[sm - 1].back();
      Tensor pooled(pooled_dims(prev.dims()));
      std::vector<std::int32_t> argmax(pooled.size());
      kernels::maxpool2x2_forward(prev.span(), prev.dims(), pooled.span(), argmax);
      t.stage_in[sm] = std::move(pooled);
      if (keep) {
        t.pool_argmax[sm - 1] = std::move(argmax);
      } else {
        t.conv_out[sm - 1].clear();
        t.stage_in[sm - 1] = Tensor();
      }
    }
    const Tensor* cur = &t.stage_in[sm];
    for (const ConvRef& c : convs_[sm]) {
      Tensor out(c.out_channels, cur->height(), cur->width());
      kernels::conv3x3_forward(cur->span(), cur->dims(), value(c.weight), value(c.bias), c.out_channels, out.span());
      kernels::selu_inplace(out.span());
      t.conv_out[sm].push_back(std::move(out));
      cur = &t.conv_out[sm].back();
    }
    const Tensor& feature = *cur;

    Tensor side(1, feature.height(), feature.width());
    kernels::conv1x1_forward(feature.span(), feature.dims(), value(side_[sm].weight), value(side_[sm].bias), 1,
                             side.span());
    kernels::bilinear_resize(side.span(), side.dims(), h, w, t.side_logits_up.channel(m));

    if (options.embed_stages[sm]) {
      const int d = config_.embed_dim;
      Tensor hidden(d, feature.height(), feature.width());
      kernels::conv1x1_forward(feature.span(), feature.dims(), value(proj1_[sm].weight), value(proj1_[sm].bias), d,
                               hidden.span());
      kernels::selu_inplace(hidden.span());
      Tensor z(d, feature.height(), feature.width());
      kernels::conv1x1_forward(hidden.span(), hidden.dims(), value(proj2_[sm].weight), value(proj2_[sm].bias), d,
                               z.span());
      EmbeddingMap& e = t.outputs.stage_embeddings[sm];
      e.height = feature.height();
      e.width = feature.width();
      e.dim = d;
      const std::size_t hw = z.dims().plane();
      e.rows.assign(hw * static_cast<std::size_t>(d), 0.0f);
      for (std::size_t px = 0; px < hw; ++px) {
        double n2 = 0.0;
        for (int c = 0; c < d; ++c) n2 += static_cast<double>(z.data()[c * hw + px]) * z.data()[c * hw + px];
        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
        for (int c = 0; c < d; ++c) {
          e.rows[px * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
              static_cast<float>(z.data()[c * hw + px] * inv);
        }
      }
      if (keep) {
        t.proj_hidden[sm] = std::move(hidden);
        t.proj_out[sm] = std::move(z);
      }
    }
  }
  if (!keep) {
    t.conv_out[kStages - 1].clear();
    t.stage_in[kStages - 1] = Tensor();
  }

  for (int m = 0; m < kStages; ++m) {
    Tensor prob(1, h, w);
    kernels::sigmoid(t.side_logits_up.channel(m), prob.span());
    t.outputs.side_probs[static_cast<std::size_t>(m)] = std::move(prob);
  }
  Tensor fused(1, h, w);
  kernels::conv1x1_forward(t.side_logits_up.span(), t.side_logits_up.dims(), value(fuse_.weight), value(fuse_.bias),
                           1, fused.span());
  t.outputs.fused_prob = Tensor(1, h, w);
  kernels::sigmoid(fused.span(), t.outputs.fused_prob.span());
  if (!keep) t.side_logits_up = Tensor();
}

StageOutputs CRSeg::forward(const Tensor& image, const ForwardOptions& options) const {
  ForwardTrace trace;
  run(image, options, trace, false);
  return std::move(trace.outputs);
}

std::vector<StageOutputs> CRSeg::forward(const std::vector<Tensor>& batch, const ForwardOptions& options) const {
  std::vector<StageOutputs> out;
  out.reserve(batch.size());
  for (const auto& image : batch) out.push_back(forward(image, options));
  return out;
}

ForwardTrace CRSeg::forward_trace(const Tensor& image, const ForwardOptions& options) const {
  ForwardTrace trace;
  run(image, options, trace, true);
  return trace;
}

namespace {

// g * p * (1 - p): gradient through a sigmoid given its output.
void sigmoid_backward(std::span<const float> prob, std::span<const float> grad, std::span<float> out) {
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] += grad[i] * prob[i] * (1.0f - prob[i]);
}

void add_into(std::span<float> dst, std::span<const float> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void CRSeg::backward(const ForwardTrace& t, const OutputGrads& grads) {
  const int h = t.input.height;
  const int w = t.input.width;
  auto& p = params_;
  const auto value = [&](int idx) { return std::span<const float>(p[static_cast<std::size_t>(idx)].value); };
  const auto grad = [&](int idx) { return std::span<float>(p[static_cast<std::size_t>(idx)].grad); };

  // Fusion head.
  Tensor g_up(kStages, h, w);
  if (!grads.fused_prob.empty()) {
    Tensor g_fused(1, h, w);
    sigmoid_backward(t.outputs.fused_prob.span(), grads.fused_prob.span(), g_fused.span());
    kernels::conv1x1_backward(t.side_logits_up.span(), t.side_logits_up.dims(), value(fuse_.weight), 1,
                              g_fused.span(), g_up.span(), grad(fuse_.weight), grad(fuse_.bias));
  }
  for (int m = 0; m < kStages; ++m) {
    const auto sm = static_cast<std::size_t>(m);
    if (!grads.side_probs[sm].empty()) {
      sigmoid_backward(t.outputs.side_probs[sm].span(), grads.side_probs[sm].span(), g_up.channel(m));
    }
  }

  // Backbone, last stage first. g_next carries the gradient w.r.t. the input
  // of stage m + 1.
  Tensor g_next;
  for (int m = kStages - 1; m >= 0; --m) {
    const auto sm = static_cast<std::size_t>(m);
    const Tensor& feature = t.conv_out[sm].back();
    Tensor g_feat(feature.dims());
    if (m < kStages - 1) {
      kernels::maxpool2x2_backward(g_next.span(), t.pool_argmax[sm], g_feat.span());
    }

    Tensor g_side(1, feature.height(), feature.width());
    kernels::bilinear_resize_backward(g_up.channel(m), g_side.dims(), h, w, g_side.span());
    Tensor g_tmp(feature.dims());
    kernels::conv1x1_backward(feature.span(), feature.dims(), value(side_[sm].weight), 1, g_side.span(),
                              g_tmp.span(), grad(side_[sm].weight), grad(side_[sm].bias));
    add_into(g_feat.span(), g_tmp.span());

    if (!grads.stage_embeddings[sm].empty()) {
      const EmbeddingMap& e = t.outputs.stage_embeddings[sm];
      if (e.empty()) throw ArgumentError("backward: embedding gradient for a stage without embeddings");
      const Tensor& z = t.proj_out[sm];
      const Tensor& hidden = t.proj_hidden[sm];
      const int d = config_.embed_dim;
      const std::size_t hw = z.dims().plane();
      const auto& ge = grads.stage_embeddings[sm];
      Tensor g_z(z.dims());
      for (std::size_t px = 0; px < hw; ++px) {
        double n2 = 0.0;
        double proj = 0.0;
        for (int c = 0; c < d; ++c) {
          const std::size_t r = px * static_cast<std::size_t>(d) + static_cast<std::size_t>(c);
          n2 += static_cast<double>(z.data()[c * hw + px]) * z.data()[c * hw + px];
          proj += static_cast<double>(e.rows[r]) * ge[r];
        }
        const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
        for (int c = 0; c < d; ++c) {
          const std::size_t r = px * static_cast<std::size_t>(d) + static_cast<std::size_t>(c);
          g_z.data()[c * hw + px] = static_cast<float>((ge[r] - e.rows[r] * proj) * inv);
        }
      }
      Tensor g_hidden(hidden.dims());
      kernels::conv1x1_backward(hidden.span(), hidden.dims(), value(proj2_[sm].weight), d, g_z.span(),
                                g_hidden.span(), grad(proj2_[sm].weight), grad(proj2_[sm].bias));
      kernels::selu_backward(hidden.span(), g_hidden.span(), g_hidden.span());
      kernels::conv1x1_backward(feature.span(), feature.dims(), value(proj1_[sm].weight), d, g_hidden.span(),
                                g_tmp.span(), grad(proj1_[sm].weight), grad(proj1_[sm].bias));
      add_into(g_feat.span(), g_tmp.span());
    }

    // Conv chain of this stage, last layer first.
    Tensor g = std::move(g_feat);
    const auto& layers = convs_[sm];
    for (int j = static_cast<int>(layers.size()) - 1; j >= 0; --j) {
      const ConvRef& c = layers[static_cast<std::size_t>(j)];
      const Tensor& out = t.conv_out[sm][static_cast<std::size_t>(j)];
      const Tensor& in = j == 0 ? t.stage_in[sm] : t.conv_out[sm][static_cast<std::size_t>(j - 1)];
      kernels::selu_backward(out.span(), g.span(), g.span());
      const bool need_input_grad = !(m == 0 && j == 0);
      Tensor g_in = need_input_grad ? Tensor(in.dims()) : Tensor();
      kernels::conv3x3_backward(in.span(), in.dims(), value(c.weight), c.out_channels, g.span(), g_in.span(),
                                grad(c.weight), grad(c.bias));
      g = std::move(g_in);
    }
    g_next = std::move(g);
  }
}

Tensor concat_channels(const Tensor& image, const Tensor& extra) {
  if (extra.channels() != 1 || extra.height() != image.height() || extra.width() != image.width()) {
    throw ArgumentError("concat_channels: extra map must be one channel of the image size");
  }
  Tensor out(image.channels() + 1, image.height(), image.width());
  std::copy(image.vec().begin(), image.vec().end(), out.vec().begin());
  std::copy(extra.vec().begin(), extra.vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(image.size()));
  return out;
}

RoadMaps road_cascade_forward(const CRSeg& surface_model, const CRSeg& edge_model, const CRSeg& centerline_model,
                              const Tensor& image) {
  const int c = image.channels();
  if (surface_model.config().in_channels != c || edge_model.config().in_channels != c + 1 ||
      centerline_model.config().in_channels != c + 1) {
    throw ArgumentError("road_cascade_forward: edge and centerline models need image channels + 1 inputs");
  }
  RoadMaps maps;
  maps.surface = surface_model.forward(image).fused_prob;
  const Tensor guided = concat_channels(image, maps.surface);
  maps.edge = edge_model.forward(guided).fused_prob;
  maps.centerline = centerline_model.forward(guided).fused_prob;
  return maps;
}

}  // namespace crseg
