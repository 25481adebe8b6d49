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

#include <filesystem>

#include "crseg/data_model.hpp"
#include "crseg/tensor.hpp"

namespace crseg {

// 8-bit PNG I/O. Images are quantized to round(v * 255); gray files load as
// one channel, everything else as RGB. Throws FormatError.
void write_png(const std::filesystem::path& path, const Tensor& image);
[[nodiscard]] Tensor read_png(const std::filesystem::path& path);

// Masks are stored with values {0, 255}; pixels >= 128 read back as 1.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
[[nodiscard]] Mask read_mask_png(const std::filesystem::path& path);

}  // namespace crseg
