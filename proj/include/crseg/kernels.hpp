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

// Compute kernels for the segmentation network. Every kernel here is
// OpenMP-parallel over independent outputs, so results do not depend on the
// thread count. reference_kernels.hpp holds serial twins used by the tests
// and the benchmark target.

#include <cstdint>
#include <span>

#include "crseg/tensor.hpp"

namespace crseg {

inline constexpr float kSeluLambda = 1.0507009873554804934193349852946f;
inline constexpr float kSeluAlpha = 1.6732632423543772848170429916717f;

// Output size of a 2x2 stride-2 max pool in ceil mode.
[[nodiscard]] inline Dims pooled_dims(Dims in) {
  return Dims{in.channels, (in.height + 1) / 2, (in.width + 1) / 2};
}

namespace kernels {

// C = A * B, or C += A * B when accumulate is set. Row-major, leading
// dimensions in elements. A is m x k, B is k x n, C is m x n.
void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate);

// dst (cols x rows) = transpose of src (rows x cols).
void transpose(int rows, int cols, const float* src, int ld_src, float* dst, int ld_dst);

// 3x3 convolution, stride 1, zero padding 1. weight is (Cout, Cin, 3, 3).
void conv3x3_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out);

// grad_weight and grad_bias are accumulated into; grad_in is overwritten and
// may be empty when the input gradient is not needed.
void conv3x3_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias);

// Pointwise (1x1) convolution; weight is (Cout, Cin).
void conv1x1_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out);
void conv1x1_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias);

void selu_inplace(std::span<float> x);
// Uses the activation output: d/dx selu = lambda for y > 0, y + lambda*alpha otherwise.
void selu_backward(std::span<const float> out, std::span<const float> grad_out,
                   std::span<float> grad_in);

void sigmoid(std::span<const float> x, std::span<float> y);

// argmax receives the flat input index of each window maximum.
void maxpool2x2_forward(std::span<const float> in, Dims in_dims, std::span<float> out,
                        std::span<std::int32_t> argmax);
// grad_in is overwritten.
void maxpool2x2_backward(std::span<const float> grad_out, std::span<const std::int32_t> argmax,
                         std::span<float> grad_in);

// Bilinear resize with half-pixel centers (align_corners = false), per channel.
void bilinear_resize(std::span<const float> in, Dims in_dims, int out_height, int out_width,
                     std::span<float> out);
// Adjoint of bilinear_resize; accumulates into grad_in.
void bilinear_resize_backward(std::span<const float> grad_out, Dims in_dims, int out_height,
                              int out_width, std::span<float> grad_in);

}  // namespace kernels
}  // namespace crseg
