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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace crseg {

// Flat `key = value` settings. '#' starts a comment; blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;

// Throws ConfigError on a line without '=' or a duplicate key.
[[nodiscard]] KeyValues parse_key_values(std::string_view text);
[[nodiscard]] KeyValues read_key_value_file(const std::filesystem::path& path);

// Typed accessors; throw ConfigError naming the key on bad values.
[[nodiscard]] double parse_double(const std::string& key, const std::string& value);
[[nodiscard]] long long parse_int(const std::string& key, const std::string& value);
[[nodiscard]] std::uint64_t parse_uint(const std::string& key, const std::string& value);
[[nodiscard]] bool parse_bool(const std::string& key, const std::string& value);

}  // namespace crseg
