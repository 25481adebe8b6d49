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

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace crseg {

// Spatial extent of a channel-major (C, H, W) feature map.
struct Dims {
  int channels = 0;
  int height = 0;
  int width = 0;

  [[nodiscard]] std::size_t plane() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  [[nodiscard]] std::size_t size() const { return plane() * static_cast<std::size_t>(channels); }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Dense float map stored channel-major: index = (c * H + y) * W + x.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, float fill = 0.0f) : dims_(dims), data_(dims.size(), fill) {}
  Tensor(int channels, int height, int width, float fill = 0.0f)
      : Tensor(Dims{channels, height, width}, fill) {}

  [[nodiscard]] const Dims& dims() const { return dims_; }
  [[nodiscard]] int channels() const { return dims_.channels; }
  [[nodiscard]] int height() const { return dims_.height; }
  [[nodiscard]] int width() const { return dims_.width; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] float* data() { return data_.data(); }
  [[nodiscard]] const float* data() const { return data_.data(); }
  [[nodiscard]] std::span<float> span() { return data_; }
  [[nodiscard]] std::span<const float> span() const { return data_; }
  [[nodiscard]] std::vector<float>& vec() { return data_; }
  [[nodiscard]] const std::vector<float>& vec() const { return data_; }

  [[nodiscard]] float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * dims_.height + y) * dims_.width + x];
  }
  [[nodiscard]] float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * dims_.height + y) * dims_.width + x];
  }
  [[nodiscard]] std::span<float> channel(int c) {
    return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * dims_.plane(), dims_.plane());
  }
  [[nodiscard]] std::span<const float> channel(int c) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * dims_.plane(),
                                                 dims_.plane());
  }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Dims dims_;
  std::vector<float> data_;
};

}  // namespace crseg
