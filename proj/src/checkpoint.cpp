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

#include <bit>
#include <cstring>
#include <fstream>

#include "crseg/errors.hpp"
#include "json.hpp"

namespace crseg {
namespace {

constexpr char kMagic[8] = {'C', 'R', 'S', 'E', 'G', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw FormatError("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(const CRSeg& model, const std::filesystem::path& path) {
  const auto& cfg = model.config();
  nlohmann::json header;
  header["format"] = "crseg-checkpoint";
  header["version"] = kVersion;
  header["seed"] = model.seed();
  header["config"] = {{"in_channels", cfg.in_channels},
                      {"base_width", cfg.base_width},
                      {"stage_convs", cfg.stage_convs},
                      {"embed_dim", cfg.embed_dim}};
  auto arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.parameters()) {
    arrays.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}, {"count", p.value.size()}});
    offset += p.value.size() * sizeof(float);
  }
  header["arrays"] = std::move(arrays);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.parameters()) {
    out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  }
  if (!out) throw FormatError("error writing checkpoint " + path.string());
}

CRSeg load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a crseg checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = read_pod<std::uint64_t>(in);
  if (header_len > (std::uint64_t{1} << 30)) throw FormatError("checkpoint header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw FormatError("checkpoint truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    CRSegConfig cfg;
    const auto& c = header.at("config");
    cfg.in_channels = c.at("in_channels").get<int>();
    cfg.base_width = c.at("base_width").get<int>();
    cfg.stage_convs = c.at("stage_convs").get<std::array<int, kStages>>();
    cfg.embed_dim = c.at("embed_dim").get<int>();
    CRSeg model(cfg, header.at("seed").get<std::uint64_t>());

    const auto payload_start = in.tellg();
    for (const auto& entry : header.at("arrays")) {
      Parameter& p = model.parameter(entry.at("name").get<std::string>());
      const auto count = entry.at("count").get<std::size_t>();
      if (count != p.value.size() || entry.at("shape").get<std::vector<int>>() != p.shape) {
        throw FormatError("checkpoint array " + p.name + " has the wrong shape");
      }
      in.seekg(payload_start + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
      in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(count * sizeof(float)));
      if (!in) throw FormatError("checkpoint truncated in array " + p.name);
    }
    if (header.at("arrays").size() != model.parameters().size()) {
      throw FormatError("checkpoint does not cover every parameter");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint header: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError("bad checkpoint config: " + std::string(e.what()));
  } catch (const ArgumentError& e) {
    throw FormatError("bad checkpoint: " + std::string(e.what()));
  }
}

}  // namespace crseg
