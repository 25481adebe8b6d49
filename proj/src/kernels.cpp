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

#include "crseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace crseg::kernels {
namespace {

// 16-lane float vector; lowered to AVX-512, AVX2 pairs or SSE quads depending
// on the target.
using v16 = float __attribute__((vector_size(64)));

inline v16 load16(const float* p) {
  v16 v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}
inline void store16(float* p, v16 v) { std::memcpy(p, &v, sizeof(v)); }

constexpr int kMr = 6;
constexpr int kNr = 64;

// Rows x 64 register tile.
template <int Rows>
void tile_full(int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
               bool accumulate) {
  v16 acc[Rows][4];
  for (int r = 0; r < Rows; ++r) {
    for (int q = 0; q < 4; ++q) acc[r][q] = v16{};
  }
  for (int p = 0; p < k; ++p) {
    const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
    const v16 b0 = load16(brow);
    const v16 b1 = load16(brow + 16);
    const v16 b2 = load16(brow + 32);
    const v16 b3 = load16(brow + 48);
    for (int r = 0; r < Rows; ++r) {
      const float av = a[static_cast<std::ptrdiff_t>(r) * lda + p];
      acc[r][0] += b0 * av;
      acc[r][1] += b1 * av;
      acc[r][2] += b2 * av;
      acc[r][3] += b3 * av;
    }
  }
  for (int r = 0; r < Rows; ++r) {
    float* crow = c + static_cast<std::ptrdiff_t>(r) * ldc;
    for (int q = 0; q < 4; ++q) {
      v16 v = acc[r][q];
      if (accumulate) v += load16(crow + 16 * q);
      store16(crow + 16 * q, v);
    }
  }
}

// Rows x width tile for the ragged right edge, width < 64.
template <int Rows>
void tile_edge(int k, int width, const float* a, int lda, const float* b, int ldb, float* c,
               int ldc, bool accumulate) {
  int j = 0;
  for (; j + 16 <= width; j += 16) {
    v16 acc[Rows];
    for (int r = 0; r < Rows; ++r) acc[r] = v16{};
    for (int p = 0; p < k; ++p) {
      const v16 bv = load16(b + static_cast<std::ptrdiff_t>(p) * ldb + j);
      for (int r = 0; r < Rows; ++r) acc[r] += bv * a[static_cast<std::ptrdiff_t>(r) * lda + p];
    }
    for (int r = 0; r < Rows; ++r) {
      float* dst = c + static_cast<std::ptrdiff_t>(r) * ldc + j;
      v16 v = acc[r];
      if (accumulate) v += load16(dst);
      store16(dst, v);
    }
  }
  const int rest = width - j;
  if (rest == 0) return;
  float acc[Rows][16] = {};
  for (int p = 0; p < k; ++p) {
    const float* brow = b + static_cast<std::ptrdiff_t>(p) * ldb + j;
    for (int r = 0; r < Rows; ++r) {
      const float av = a[static_cast<std::ptrdiff_t>(r) * lda + p];
      for (int q = 0; q < rest; ++q) acc[r][q] += av * brow[q];
    }
  }
  for (int r = 0; r < Rows; ++r) {
    float* dst = c + static_cast<std::ptrdiff_t>(r) * ldc + j;
    for (int q = 0; q < rest; ++q) dst[q] = accumulate ? dst[q] + acc[r][q] : acc[r][q];
  }
}

template <int Rows>
void tile(int k, int width, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate) {
  if (width == kNr) {
    tile_full<Rows>(k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    tile_edge<Rows>(k, width, a, lda, b, ldb, c, ldc, accumulate);
  }
}

void dispatch_tile(int rows, int k, int width, const float* a, int lda, const float* b, int ldb,
                   float* c, int ldc, bool accumulate) {
  switch (rows) {
    case 6: tile<6>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
    case 5: tile<5>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
    case 4: tile<4>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
    case 3: tile<3>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
    case 2: tile<2>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
    default: tile<1>(k, width, a, lda, b, ldb, c, ldc, accumulate); break;
  }
}

// Upper bound on the im2col scratch per convolution chunk, in floats.
constexpr std::size_t kColBudget = std::size_t{1} << 18;

int rows_per_chunk(int k, int height, int width) {
  const std::size_t per_row = static_cast<std::size_t>(k) * static_cast<std::size_t>(width);
  const auto rows = static_cast<int>(std::max<std::size_t>(1, kColBudget / per_row));
  return std::min(rows, height);
}

// col is (Cin*9) x (rows*W): col[(ci*9 + ky*3 + kx), (y - y0) * W + x].
void im2col3x3(const float* in, Dims d, int y0, int y1, float* col) {
  const int w = d.width;
  const int n = (y1 - y0) * w;
  const int taps = d.channels * 9;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < taps; ++t) {
    const int ci = t / 9;
    const int ky = (t % 9) / 3 - 1;
    const int kx = t % 3 - 1;
    const float* plane = in + static_cast<std::size_t>(ci) * d.plane();
    float* dst = col + static_cast<std::size_t>(t) * n;
    for (int y = y0; y < y1; ++y) {
      float* row = dst + static_cast<std::size_t>(y - y0) * w;
      const int sy = y + ky;
      if (sy < 0 || sy >= d.height) {
        std::fill(row, row + w, 0.0f);
        continue;
      }
      const float* src = plane + static_cast<std::size_t>(sy) * w;
      const int x_lo = std::max(0, -kx);
      const int x_hi = std::min(w, w - kx);
      for (int x = 0; x < x_lo; ++x) row[x] = 0.0f;
      std::memcpy(row + x_lo, src + x_lo + kx, sizeof(float) * static_cast<std::size_t>(x_hi - x_lo));
      for (int x = x_hi; x < w; ++x) row[x] = 0.0f;
    }
  }
}

// Adjoint of im2col3x3 restricted to rows [y0, y1); accumulates into grad_in.
// Parallel over input channels, so no two threads touch the same plane.
void col2im3x3(const float* col, Dims d, int y0, int y1, float* grad_in) {
  const int w = d.width;
  const int n = (y1 - y0) * w;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < d.channels; ++ci) {
    float* plane = grad_in + static_cast<std::size_t>(ci) * d.plane();
    for (int tap = 0; tap < 9; ++tap) {
      const int ky = tap / 3 - 1;
      const int kx = tap % 3 - 1;
      const float* src = col + static_cast<std::size_t>(ci * 9 + tap) * n;
      for (int y = y0; y < y1; ++y) {
        const int sy = y + ky;
        if (sy < 0 || sy >= d.height) continue;
        const float* row = src + static_cast<std::size_t>(y - y0) * w;
        float* dst = plane + static_cast<std::size_t>(sy) * w;
        const int x_lo = std::max(0, -kx);
        const int x_hi = std::min(w, w - kx);
        for (int x = x_lo; x < x_hi; ++x) dst[x + kx] += row[x];
      }
    }
  }
}

void add_bias(std::span<const float> bias, std::size_t plane, std::span<float> out) {
  if (bias.empty()) return;
  const int channels = static_cast<int>(bias.size());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    float* p = out.data() + static_cast<std::size_t>(c) * plane;
    const float b = bias[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

void accumulate_bias_grad(std::span<const float> grad_out, std::size_t plane,
                          std::span<float> grad_bias) {
  if (grad_bias.empty()) return;
  const int channels = static_cast<int>(grad_bias.size());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const float* p = grad_out.data() + static_cast<std::size_t>(c) * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    grad_bias[static_cast<std::size_t>(c)] += static_cast<float>(s);
  }
}

}  // namespace

void gemm(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
          bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate) {
      for (int i = 0; i < m; ++i) std::fill(c + static_cast<std::ptrdiff_t>(i) * ldc, c + static_cast<std::ptrdiff_t>(i) * ldc + n, 0.0f);
    }
    return;
  }
  const int row_tiles = (m + kMr - 1) / kMr;
  const int col_tiles = (n + kNr - 1) / kNr;
  const int tiles = row_tiles * col_tiles;
  // Consecutive tiles share a column panel of B.
#pragma omp parallel for schedule(static)
  for (int t = 0; t < tiles; ++t) {
    const int jt = t / row_tiles;
    const int it = t % row_tiles;
    const int i0 = it * kMr;
    const int j0 = jt * kNr;
    const int rows = std::min(kMr, m - i0);
    const int width = std::min(kNr, n - j0);
    dispatch_tile(rows, k, width, a + static_cast<std::ptrdiff_t>(i0) * lda, lda, b + j0, ldb,
                  c + static_cast<std::ptrdiff_t>(i0) * ldc + j0, ldc, accumulate);
  }
}

void transpose(int rows, int cols, const float* src, int ld_src, float* dst, int ld_dst) {
  constexpr int kBlock = 32;
#pragma omp parallel for schedule(static)
  for (int jb = 0; jb < cols; jb += kBlock) {
    for (int ib = 0; ib < rows; ib += kBlock) {
      const int i_end = std::min(rows, ib + kBlock);
      const int j_end = std::min(cols, jb + kBlock);
      for (int j = jb; j < j_end; ++j) {
        for (int i = ib; i < i_end; ++i) {
          dst[static_cast<std::ptrdiff_t>(j) * ld_dst + i] = src[static_cast<std::ptrdiff_t>(i) * ld_src + j];
        }
      }
    }
  }
}

void conv3x3_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out) {
  const int k = in_dims.channels * 9;
  const int w = in_dims.width;
  const int hw = static_cast<int>(in_dims.plane());
  const int chunk = rows_per_chunk(k, in_dims.height, w);
  std::vector<float> col(static_cast<std::size_t>(k) * chunk * w);
  for (int y0 = 0; y0 < in_dims.height; y0 += chunk) {
    const int y1 = std::min(in_dims.height, y0 + chunk);
    const int n = (y1 - y0) * w;
    im2col3x3(in.data(), in_dims, y0, y1, col.data());
    gemm(out_channels, n, k, weight.data(), k, col.data(), n, out.data() + static_cast<std::ptrdiff_t>(y0) * w,
         hw, false);
  }
  add_bias(bias, in_dims.plane(), out);
}

void conv3x3_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias) {
  const int k = in_dims.channels * 9;
  const int w = in_dims.width;
  const int hw = static_cast<int>(in_dims.plane());
  const int chunk = rows_per_chunk(k, in_dims.height, w);
  const std::size_t col_size = static_cast<std::size_t>(k) * chunk * w;
  std::vector<float> col(col_size);
  std::vector<float> col_t(col_size);
  std::vector<float> weight_t;
  if (!grad_in.empty()) {
    std::fill(grad_in.begin(), grad_in.end(), 0.0f);
    weight_t.resize(static_cast<std::size_t>(k) * out_channels);
    transpose(out_channels, k, weight.data(), k, weight_t.data(), out_channels);
  }
  for (int y0 = 0; y0 < in_dims.height; y0 += chunk) {
    const int y1 = std::min(in_dims.height, y0 + chunk);
    const int n = (y1 - y0) * w;
    const float* g = grad_out.data() + static_cast<std::ptrdiff_t>(y0) * w;
    im2col3x3(in.data(), in_dims, y0, y1, col.data());
    transpose(k, n, col.data(), n, col_t.data(), k);
    gemm(out_channels, k, n, g, hw, col_t.data(), k, grad_weight.data(), k, true);
    if (!grad_in.empty()) {
      gemm(k, n, out_channels, weight_t.data(), out_channels, g, hw, col.data(), n, false);
      col2im3x3(col.data(), in_dims, y0, y1, grad_in.data());
    }
  }
  accumulate_bias_grad(grad_out, in_dims.plane(), grad_bias);
}

void conv1x1_forward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                     std::span<const float> bias, int out_channels, std::span<float> out) {
  const int hw = static_cast<int>(in_dims.plane());
  gemm(out_channels, hw, in_dims.channels, weight.data(), in_dims.channels, in.data(), hw,
       out.data(), hw, false);
  add_bias(bias, in_dims.plane(), out);
}

void conv1x1_backward(std::span<const float> in, Dims in_dims, std::span<const float> weight,
                      int out_channels, std::span<const float> grad_out, std::span<float> grad_in,
                      std::span<float> grad_weight, std::span<float> grad_bias) {
  const int hw = static_cast<int>(in_dims.plane());
  const int cin = in_dims.channels;
  if (!grad_weight.empty()) {
    std::vector<float> in_t(in.size());
    transpose(cin, hw, in.data(), hw, in_t.data(), cin);
    gemm(out_channels, cin, hw, grad_out.data(), hw, in_t.data(), cin, grad_weight.data(), cin,
         true);
  }
  if (!grad_in.empty()) {
    std::vector<float> weight_t(static_cast<std::size_t>(cin) * out_channels);
    transpose(out_channels, cin, weight.data(), cin, weight_t.data(), out_channels);
    gemm(cin, hw, out_channels, weight_t.data(), out_channels, grad_out.data(), hw,
         grad_in.data(), hw, false);
  }
  accumulate_bias_grad(grad_out, in_dims.plane(), grad_bias);
}

void selu_inplace(std::span<float> x) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  float* p = x.data();
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const float v = p[i];
    p[i] = v > 0.0f ? kSeluLambda * v : kSeluLambda * kSeluAlpha * std::expm1(v);
  }
}

void selu_backward(std::span<const float> out, std::span<const float> grad_out,
                   std::span<float> grad_in) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const float y = out[static_cast<std::size_t>(i)];
    const float d = y > 0.0f ? kSeluLambda : y + kSeluLambda * kSeluAlpha;
    grad_in[static_cast<std::size_t>(i)] = grad_out[static_cast<std::size_t>(i)] * d;
  }
}

void sigmoid(std::span<const float> x, std::span<float> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const float v = x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(i)] = v >= 0.0f ? 1.0f / (1.0f + std::exp(-v))
                                               : std::exp(v) / (1.0f + std::exp(v));
  }
}

void maxpool2x2_forward(std::span<const float> in, Dims in_dims, std::span<float> out,
                        std::span<std::int32_t> argmax) {
  const Dims od = pooled_dims(in_dims);
  const int rows = od.channels * od.height;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / od.height;
    const int oy = r % od.height;
    const std::size_t base = static_cast<std::size_t>(c) * in_dims.plane();
    const int y_end = std::min(in_dims.height, 2 * oy + 2);
    for (int ox = 0; ox < od.width; ++ox) {
      const int x_end = std::min(in_dims.width, 2 * ox + 2);
      std::size_t best = base + static_cast<std::size_t>(2 * oy) * in_dims.width + 2 * ox;
      float best_v = in[best];
      for (int y = 2 * oy; y < y_end; ++y) {
        for (int x = 2 * ox; x < x_end; ++x) {
          const std::size_t idx = base + static_cast<std::size_t>(y) * in_dims.width + x;
          if (in[idx] > best_v) {
            best_v = in[idx];
            best = idx;
          }
        }
      }
      const std::size_t o = (static_cast<std::size_t>(c) * od.height + oy) * od.width + ox;
      out[o] = best_v;
      argmax[o] = static_cast<std::int32_t>(best);
    }
  }
}

void maxpool2x2_backward(std::span<const float> grad_out, std::span<const std::int32_t> argmax,
                         std::span<float> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0f);
  // Windows do not overlap, so each input receives at most one contribution.
  const auto n = static_cast<std::ptrdiff_t>(grad_out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    grad_in[static_cast<std::size_t>(argmax[static_cast<std::size_t>(i)])] =
        grad_out[static_cast<std::size_t>(i)];
  }
}

namespace {

struct Lerp {
  int i0;
  int i1;
  float w1;
};

std::vector<Lerp> lerp_table(int in_size, int out_size) {
  std::vector<Lerp> t(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(src);
    if (i0 > in_size - 1) i0 = in_size - 1;
    const int i1 = std::min(i0 + 1, in_size - 1);
    t[static_cast<std::size_t>(o)] = Lerp{i0, i1, static_cast<float>(src - i0)};
  }
  return t;
}

}  // namespace

void bilinear_resize(std::span<const float> in, Dims in_dims, int out_height, int out_width,
                     std::span<float> out) {
  const auto ty = lerp_table(in_dims.height, out_height);
  const auto tx = lerp_table(in_dims.width, out_width);
  const int rows = in_dims.channels * out_height;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / out_height;
    const int oy = r % out_height;
    const Lerp& ly = ty[static_cast<std::size_t>(oy)];
    const float* plane = in.data() + static_cast<std::size_t>(c) * in_dims.plane();
    const float* r0 = plane + static_cast<std::size_t>(ly.i0) * in_dims.width;
    const float* r1 = plane + static_cast<std::size_t>(ly.i1) * in_dims.width;
    float* dst = out.data() + (static_cast<std::size_t>(c) * out_height + oy) * out_width;
    for (int ox = 0; ox < out_width; ++ox) {
      const Lerp& lx = tx[static_cast<std::size_t>(ox)];
      const float top = r0[lx.i0] + lx.w1 * (r0[lx.i1] - r0[lx.i0]);
      const float bot = r1[lx.i0] + lx.w1 * (r1[lx.i1] - r1[lx.i0]);
      dst[ox] = top + ly.w1 * (bot - top);
    }
  }
}

void bilinear_resize_backward(std::span<const float> grad_out, Dims in_dims, int out_height,
                              int out_width, std::span<float> grad_in) {
  const auto ty = lerp_table(in_dims.height, out_height);
  const auto tx = lerp_table(in_dims.width, out_width);
  // Parallel over channels: output rows of one channel scatter into shared
  // input rows.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < in_dims.channels; ++c) {
    float* plane = grad_in.data() + static_cast<std::size_t>(c) * in_dims.plane();
    for (int oy = 0; oy < out_height; ++oy) {
      const Lerp& ly = ty[static_cast<std::size_t>(oy)];
      float* r0 = plane + static_cast<std::size_t>(ly.i0) * in_dims.width;
      float* r1 = plane + static_cast<std::size_t>(ly.i1) * in_dims.width;
      const float* g = grad_out.data() + (static_cast<std::size_t>(c) * out_height + oy) * out_width;
      for (int ox = 0; ox < out_width; ++ox) {
        const Lerp& lx = tx[static_cast<std::size_t>(ox)];
        const float top = g[ox] * (1.0f - ly.w1);
        const float bot = g[ox] * ly.w1;
        r0[lx.i0] += top * (1.0f - lx.w1);
        r0[lx.i1] += top * lx.w1;
        r1[lx.i0] += bot * (1.0f - lx.w1);
        r1[lx.i1] += bot * lx.w1;
      }
    }
  }
}

}  // namespace crseg::kernels
