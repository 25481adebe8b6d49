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
#include <filesystem>
#include <string>
#include <vector>

#include "crseg/tensor.hpp"

namespace crseg {

inline constexpr int kStages = 5;

struct CRSegConfig {
  int in_channels = 1;
  int base_width = 64;
  std::array<int, kStages> stage_convs{2, 2, 3, 3, 3};
  int embed_dim = 32;

  // Throws ConfigError.
  void validate() const;
  // VGG-16 widths scaled by base_width / 64: (1, 2, 4, 8, 8) * base_width.
  [[nodiscard]] std::array<int, kStages> stage_widths() const;
  friend bool operator==(const CRSegConfig&, const CRSegConfig&) = default;
};

// Per-pixel unit-norm embeddings at one stage, stored pixel-major:
// rows[(y * width + x) * dim + d].
struct EmbeddingMap {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> rows;

  [[nodiscard]] bool empty() const { return rows.empty(); }
  [[nodiscard]] const float* row(int index) const { return rows.data() + static_cast<std::size_t>(index) * dim; }
};

struct StageOutputs {
  std::array<Tensor, kStages> side_probs;  // (1, H, W) each
  Tensor fused_prob;                       // (1, H, W)
  // Stage m has grid ceil(H / 2^m) x ceil(W / 2^m) (m from 0). Empty unless
  // requested through ForwardOptions.
  std::array<EmbeddingMap, kStages> stage_embeddings;
};

struct ForwardOptions {
  std::array<bool, kStages> embed_stages{};

  static ForwardOptions all_embeddings() { return ForwardOptions{{true, true, true, true, true}}; }
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool decay = true;  // weights decay, biases do not
};

// Activations kept by a training forward pass for the backward pass.
struct ForwardTrace {
  Dims input;
  // conv_out[m][j]: output (after SeLU) of conv j in stage m.
  std::array<std::vector<Tensor>, kStages> conv_out;
  // Input of stage m (the image for m = 0, else the pooled map).
  std::array<Tensor, kStages> stage_in;
  // pool_argmax[m] pools stage m's last conv output into stage_in[m + 1].
  std::array<std::vector<std::int32_t>, kStages - 1> pool_argmax;
  Tensor side_logits_up;  // (5, H, W) pre-sigmoid upsampled side maps
  std::array<Tensor, kStages> proj_hidden;  // (D, h, w) after SeLU
  std::array<Tensor, kStages> proj_out;     // (D, h, w) before normalization
  StageOutputs outputs;
};

// Upstream gradients for a backward pass. Empty members mean zero.
struct OutputGrads {
  std::array<Tensor, kStages> side_probs;
  Tensor fused_prob;
  std::array<std::vector<float>, kStages> stage_embeddings;  // EmbeddingMap layout
};

// Five VGG-16-style stages (3x3 conv + SeLU, 2x2 ceil-mode max pool between
// stages) with a 1x1 one-channel side output tapped before each pool,
// bilinear upsampling to the input size, a 1x1 fusion conv over the five
// concatenated side logits, and a per-stage two-layer projection head
// producing unit-norm pixel embeddings.
class CRSeg {
 public:
  CRSeg(const CRSegConfig& config, std::uint64_t seed);

  [[nodiscard]] const CRSegConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::vector<Parameter>& parameters() { return params_; }
  [[nodiscard]] const std::vector<Parameter>& parameters() const { return params_; }
  [[nodiscard]] Parameter& parameter(const std::string& name);
  [[nodiscard]] const Parameter& parameter(const std::string& name) const;

  // Inference. Safe to call concurrently. Throws ArgumentError when the image
  // has the wrong channel count or a side shorter than 16.
  [[nodiscard]] StageOutputs forward(const Tensor& image, const ForwardOptions& options = {}) const;
  [[nodiscard]] std::vector<StageOutputs> forward(const std::vector<Tensor>& batch,
                                                  const ForwardOptions& options = {}) const;

  // Training forward pass; the returned trace feeds backward().
  [[nodiscard]] ForwardTrace forward_trace(const Tensor& image, const ForwardOptions& options = {}) const;
  // Accumulates parameter gradients.
  void backward(const ForwardTrace& trace, const OutputGrads& grads);
  void zero_grad();

  // Number of weights and biases in the 13 backbone convolutions.
  [[nodiscard]] std::size_t backbone_parameter_count() const;
  [[nodiscard]] std::size_t parameter_count() const;

 private:
  struct ConvRef {
    int weight;
    int bias;
    int in_channels;
    int out_channels;
  };

  void add_conv(const std::string& name, int in_channels, int out_channels, int kernel, double init_std,
                ConvRef& ref, std::uint64_t stream);
  void run(const Tensor& image, const ForwardOptions& options, ForwardTrace& trace, bool keep) const;

  CRSegConfig config_;
  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::array<std::vector<ConvRef>, kStages> convs_;
  std::array<ConvRef, kStages> side_;
  ConvRef fuse_{};
  std::array<ConvRef, kStages> proj1_;
  std::array<ConvRef, kStages> proj2_;
};

// 1 for the first stage, then doubling: the downsampling factor of stage m.
[[nodiscard]] inline int stage_stride(int stage) { return 1 << stage; }

// Sum over the 13 convolutions of 9 * Cin * Cout + Cout.
[[nodiscard]] std::size_t vgg_backbone_parameter_count(int in_channels, int base_width);

struct RoadMaps {
  Tensor surface;
  Tensor edge;
  Tensor centerline;
};

// Channel-wise concatenation of an image and a one-channel map.
[[nodiscard]] Tensor concat_channels(const Tensor& image, const Tensor& extra);

// Surface prediction from the image; edge and centerline networks see the
// image plus the surface probability as an extra channel.
[[nodiscard]] RoadMaps road_cascade_forward(const CRSeg& surface_model, const CRSeg& edge_model,
                                            const CRSeg& centerline_model, const Tensor& image);

// Named-array checkpoint archive. Layout:
//   bytes 0..7   magic "CRSEGCKP"
//   u32          format version (1)
//   u64          header length in bytes
//   header       UTF-8 JSON: {"version", "config", "seed", "arrays": [{"name",
//                "shape", "offset", "count"}]} with offsets relative to the
//                payload start
//   payload      float32 little-endian parameter values
// Throws FormatError.
void save_checkpoint(const CRSeg& model, const std::filesystem::path& path);
[[nodiscard]] CRSeg load_checkpoint(const std::filesystem::path& path);

}  // namespace crseg
