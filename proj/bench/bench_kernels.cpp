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

// Compares the OpenMP kernels against their serial reference twins.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "crseg/kernels.hpp"
#include "crseg/reference_kernels.hpp"

namespace {

std::vector<float> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  const int k = static_cast<int>(state.range(2));
  const auto a = random_vector(static_cast<std::size_t>(m) * k, 1);
  const auto b = random_vector(static_cast<std::size_t>(k) * n, 2);
  std::vector<float> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    if constexpr (Reference) {
      crseg::reference::gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
    } else {
      crseg::kernels::gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * m * n * k, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Gemm<false>)->Args({32, 4096, 144})->Args({64, 1024, 576})->Args({128, 256, 1152})->Args({16, 144, 4096});
BENCHMARK(BM_Gemm<true>)->Args({32, 4096, 144})->Args({64, 1024, 576});

template <bool Reference>
void BM_Conv3x3Forward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = static_cast<int>(state.range(1));
  const int size = static_cast<int>(state.range(2));
  const crseg::Dims d{cin, size, size};
  const auto in = random_vector(d.size(), 3);
  const auto w = random_vector(static_cast<std::size_t>(cout) * cin * 9, 4);
  const auto b = random_vector(static_cast<std::size_t>(cout), 5);
  std::vector<float> out(static_cast<std::size_t>(cout) * d.plane());
  for (auto _ : state) {
    if constexpr (Reference) {
      crseg::reference::conv3x3_forward(in, d, w, b, cout, out);
    } else {
      crseg::kernels::conv3x3_forward(in, d, w, b, cout, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * cout * cin * 9 * d.plane(),
                                                benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Conv3x3Forward<false>)->Args({16, 16, 64})->Args({32, 64, 32})->Args({128, 128, 8});
BENCHMARK(BM_Conv3x3Forward<true>)->Args({16, 16, 64});

template <bool Reference>
void BM_Conv3x3Backward(benchmark::State& state) {
  const int cin = static_cast<int>(state.range(0));
  const int cout = static_cast<int>(state.range(1));
  const int size = static_cast<int>(state.range(2));
  const crseg::Dims d{cin, size, size};
  const auto in = random_vector(d.size(), 3);
  const auto w = random_vector(static_cast<std::size_t>(cout) * cin * 9, 4);
  const auto g = random_vector(static_cast<std::size_t>(cout) * d.plane(), 5);
  std::vector<float> gin(d.size());
  std::vector<float> gw(w.size());
  std::vector<float> gb(static_cast<std::size_t>(cout));
  for (auto _ : state) {
    if constexpr (Reference) {
      crseg::reference::conv3x3_backward(in, d, w, cout, g, gin, gw, gb);
    } else {
      crseg::kernels::conv3x3_backward(in, d, w, cout, g, gin, gw, gb);
    }
    benchmark::DoNotOptimize(gin.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(4.0 * cout * cin * 9 * d.plane(),
                                                benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Conv3x3Backward<false>)->Args({16, 16, 64})->Args({32, 64, 32})->Args({128, 128, 8});
BENCHMARK(BM_Conv3x3Backward<true>)->Args({16, 16, 32});

template <bool Reference>
void BM_Bilinear(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const crseg::Dims d{1, size / 8, size / 8};
  const auto in = random_vector(d.size(), 6);
  std::vector<float> out(static_cast<std::size_t>(size) * size);
  for (auto _ : state) {
    if constexpr (Reference) {
      crseg::reference::bilinear_resize(in, d, size, size, out);
    } else {
      crseg::kernels::bilinear_resize(in, d, size, size, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Bilinear<false>)->Arg(128);
BENCHMARK(BM_Bilinear<true>)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
