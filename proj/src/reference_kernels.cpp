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

#include "crseg/reference_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace crseg::reference {

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) {
        s += static_cast<double>(a[static_cast<std::ptrdiff_t>(i) * lda + p]) *
             b[static_cast<std::ptrdiff_t>(p) * ldb + j];
      }
      float& dst = c[static_cast<std::ptrdiff_t>(i) * ldc + j];
      dst = accumulate ? dst + static_cast<float>(s) : static_cast<float>(s);
    }
  }
}

namespace {

float input_at(std::span<const float> in, Dims d, int c, int y, int x) {
  if (y < 0 || y >= d.height || x < 0 || x >= d.width) return 0.0f;
  return in[(static_cast<std::size_t>(c) * d.height + y) * d.width + x];
}

}  // namespace

void conv3x3_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out) {
  const int cin = in_dims.channels;
  for (int co = 0; co < out_channels; ++co) {
    for (int y = 0; y < in_dims.height; ++y) {
      for (int x = 0; x < in_dims.width; ++x) {
        double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              s += static_cast<double>(weight[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx]) *
                   input_at(in, in_dims, ci, y + ky - 1, x + kx - 1);
            }
          }
        }
        out[(static_cast<std::size_t>(co) * in_dims.height + y) * in_dims.width + x] = static_cast<float>(s);
      }
    }
  }
}

void conv3x3_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias) {
  const int cin = in_dims.channels;
  const int h = in_dims.height;
  const int w = in_dims.width;
  if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0f);
  for (int co = 0; co < out_channels; ++co) {
    double gb = 0.0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float g = grad_out[(static_cast<std::size_t>(co) * h + y) * w + x];
        gb += g;
        for (int ci = 0; ci < cin; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1;
              const int sx = x + kx - 1;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx;
              const std::size_t iidx = (static_cast<std::size_t>(ci) * h + sy) * w + sx;
              grad_weight[widx] += g * in[iidx];
              if (!grad_in.empty()) grad_in[iidx] += g * weight[widx];
            }
          }
        }
      }
    }
    if (!grad_bias.empty()) grad_bias[static_cast<std::size_t>(co)] += static_cast<float>(gb);
  }
}

void conv1x1_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out) {
  const std::size_t hw = in_dims.plane();
  for (int co = 0; co < out_channels; ++co) {
    for (std::size_t i = 0; i < hw; ++i) {
      double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
      for (int ci = 0; ci < in_dims.channels; ++ci) {
        s += static_cast<double>(weight[static_cast<std::size_t>(co) * in_dims.channels + ci]) *
             in[static_cast<std::size_t>(ci) * hw + i];
      }
      out[static_cast<std::size_t>(co) * hw + i] = static_cast<float>(s);
    }
  }
}

void conv1x1_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias) {
  const std::size_t hw = in_dims.plane();
  const int cin = in_dims.channels;
  if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0f);
  for (int co = 0; co < out_channels; ++co) {
    for (std::size_t i = 0; i < hw; ++i) {
      const float g = grad_out[static_cast<std::size_t>(co) * hw + i];
      if (!grad_bias.empty()) grad_bias[static_cast<std::size_t>(co)] += g;
      for (int ci = 0; ci < cin; ++ci) {
        const std::size_t widx = static_cast<std::size_t>(co) * cin + ci;
        const std::size_t iidx = static_cast<std::size_t>(ci) * hw + i;
        if (!grad_weight.empty()) grad_weight[widx] += g * in[iidx];
        if (!grad_in.empty()) grad_in[iidx] += g * weight[widx];
      }
    }
  }
}

void selu_inplace(std::span<float> x) {
  for (float& v : x) {
    v = v > 0.0f ? kSeluLambda * v : kSeluLambda * kSeluAlpha * (std::exp(v) - 1.0f);
  }
}

void selu_backward(std::span<const float> out, std::span<const float> grad_out,
                   std::span<float> grad_in) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Recover the pre-activation and differentiate it directly.
    const float y = out[i];
    float d = kSeluLambda;
    if (y <= 0.0f) {
      const float x = std::log1p(y / (kSeluLambda * kSeluAlpha));
      d = kSeluLambda * kSeluAlpha * std::exp(x);
    }
    grad_in[i] = grad_out[i] * d;
  }
}

void sigmoid(std::span<const float> x, std::span<float> y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
  }
}

void maxpool2x2_forward(std::span<const float> in, Dims in_dims, std::span<float> out,
                        std::span<std::int32_t> argmax) {
  const Dims od = pooled_dims(in_dims);
  for (int c = 0; c < od.channels; ++c) {
    for (int oy = 0; oy < od.height; ++oy) {
      for (int ox = 0; ox < od.width; ++ox) {
        float best_v = -INFINITY;
        std::int32_t best = -1;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int y = 2 * oy + dy;
            const int x = 2 * ox + dx;
            if (y >= in_dims.height || x >= in_dims.width) continue;
            const auto idx = static_cast<std::int32_t>((c * in_dims.height + y) * in_dims.width + x);
            if (best < 0 || in[static_cast<std::size_t>(idx)] > best_v) {
              best_v = in[static_cast<std::size_t>(idx)];
              best = idx;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * od.height + oy) * od.width + ox;
        out[o] = best_v;
        argmax[o] = best;
      }
    }
  }
}

void maxpool2x2_backward(std::span<const float> grad_out, std::span<const std::int32_t> argmax,
                         std::span<float> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0f);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    grad_in[static_cast<std::size_t>(argmax[i])] += grad_out[i];
  }
}

namespace {

// Weight of input sample i for output sample o under half-pixel bilinear
// resampling with edge clamping.
double bilinear_weight(int in_size, int out_size, int o, int i) {
  double src = (o + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
  src = std::max(src, 0.0);
  const int lo = std::min(static_cast<int>(std::floor(src)), in_size - 1);
  const int hi = std::min(lo + 1, in_size - 1);
  const double frac = src - lo;
  double wgt = 0.0;
  if (i == lo) wgt += 1.0 - frac;
  if (i == hi) wgt += frac;
  return wgt;
}

}  // namespace

void bilinear_resize(std::span<const float> in, Dims in_dims, int out_height, int out_width,
                     std::span<float> out) {
  for (int c = 0; c < in_dims.channels; ++c) {
    for (int oy = 0; oy < out_height; ++oy) {
      for (int ox = 0; ox < out_width; ++ox) {
        double s = 0.0;
        for (int y = 0; y < in_dims.height; ++y) {
          const double wy = bilinear_weight(in_dims.height, out_height, oy, y);
          if (wy == 0.0) continue;
          for (int x = 0; x < in_dims.width; ++x) {
            const double wx = bilinear_weight(in_dims.width, out_width, ox, x);
            if (wx == 0.0) continue;
            s += wy * wx * in[(static_cast<std::size_t>(c) * in_dims.height + y) * in_dims.width + x];
          }
        }
        out[(static_cast<std::size_t>(c) * out_height + oy) * out_width + ox] = static_cast<float>(s);
      }
    }
  }
}

void bilinear_resize_backward(std::span<const float> grad_out, Dims in_dims, int out_height,
                              int out_width, std::span<float> grad_in) {
  for (int c = 0; c < in_dims.channels; ++c) {
    for (int y = 0; y < in_dims.height; ++y) {
      for (int x = 0; x < in_dims.width; ++x) {
        double s = 0.0;
        for (int oy = 0; oy < out_height; ++oy) {
          const double wy = bilinear_weight(in_dims.height, out_height, oy, y);
          if (wy == 0.0) continue;
          for (int ox = 0; ox < out_width; ++ox) {
            const double wx = bilinear_weight(in_dims.width, out_width, ox, x);
            if (wx == 0.0) continue;
            s += wy * wx * grad_out[(static_cast<std::size_t>(c) * out_height + oy) * out_width + ox];
          }
        }
        grad_in[(static_cast<std::size_t>(c) * in_dims.height + y) * in_dims.width + x] += static_cast<float>(s);
      }
    }
  }
}

}  // namespace crseg::reference
