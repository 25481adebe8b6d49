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

#include "crseg/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "crseg/errors.hpp"
#include "crseg/image_io.hpp"
#include "crseg/random.hpp"

namespace crseg {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

void ImageSample::validate() const {
  if (labeled != mask.has_value()) {
    throw ArgumentError("sample " + id + ": labeled flag disagrees with mask presence");
  }
  for (float v : image.vec()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("sample " + id + ": image value outside [0,1]");
  }
  auto check_mask = [&](const Mask& m, const std::string& what) {
    if (m.height != image.height() || m.width != image.width()) {
      throw ArgumentError("sample " + id + ": " + what + " shape differs from image");
    }
    for (std::uint8_t v : m.data) {
      if (v > 1) throw ArgumentError("sample " + id + ": " + what + " value not in {0,1}");
    }
  };
  if (mask) check_mask(*mask, "mask");
  for (const auto& [name, m] : extra_masks) check_mask(m, name);
}

void SynthConfig::validate() const {
  if (image_size < 32) throw ConfigError("image_size must be >= 32");
  if (!(foreground_fraction_target > 0.0 && foreground_fraction_target < 0.5)) {
    throw ConfigError("foreground_fraction_target must be in (0, 0.5)");
  }
  if (n_images < 0) throw ConfigError("n_images must be >= 0");
  if (!(noise_level >= 0.0)) throw ConfigError("noise_level must be >= 0");
}

std::string to_string(SynthTask task) { return task == SynthTask::crack ? "crack" : "road"; }

SynthTask parse_task(const std::string& name) {
  if (name == "crack") return SynthTask::crack;
  if (name == "road") return SynthTask::road;
  throw ConfigError("unknown task '" + name + "' (expected crack or road)");
}

namespace {

// Smooth random field in roughly [-1, 1]: a coarse grid of uniform values
// bilinearly upsampled.
std::vector<float> value_noise(Rng& rng, int size, int cells) {
  const int g = cells + 1;
  std::vector<float> grid(static_cast<std::size_t>(g) * g);
  for (float& v : grid) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<float> out(static_cast<std::size_t>(size) * size);
  const double step = static_cast<double>(cells) / size;
  for (int y = 0; y < size; ++y) {
    const double fy = y * step;
    const int iy = std::min(static_cast<int>(fy), cells - 1);
    const double ty = fy - iy;
    for (int x = 0; x < size; ++x) {
      const double fx = x * step;
      const int ix = std::min(static_cast<int>(fx), cells - 1);
      const double tx = fx - ix;
      const auto at = [&](int yy, int xx) { return grid[static_cast<std::size_t>(yy) * g + xx]; };
      const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
      const double bot = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = static_cast<float>(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

// Marks pixels whose centers lie within radius of (cx, cy); returns how many
// were newly set.
std::size_t stamp_disk(Mask& m, double cx, double cy, double radius) {
  std::size_t added = 0;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(m.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(m.width - 1, static_cast<int>(std::ceil(cx + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r2 && m.at(y, x) == 0) {
        m.at(y, x) = 1;
        ++added;
      }
    }
  }
  return added;
}

ImageSample make_crack(const SynthConfig& cfg, int index) {
  Rng rng = Rng::derive(cfg.seed, {0x6372616bULL, static_cast<std::uint64_t>(index)});
  const int n = cfg.image_size;
  const auto area = static_cast<double>(n) * n;

  // Background: base level, coarse and fine texture.
  const double base = rng.uniform(0.45, 0.75);
  const auto coarse = value_noise(rng, n, 4);
  const auto fine = value_noise(rng, n, 16);
  Tensor image(1, n, n);
  for (std::size_t i = 0; i < image.size(); ++i) {
    image.data()[i] = static_cast<float>(base + 0.08 * coarse[i] + 0.04 * fine[i]);
  }

  // Dark stains: same darkness range as cracks, blob-shaped.
  const int stains = rng.integer(0, 3);
  for (int s = 0; s < stains; ++s) {
    const double cx = rng.uniform(0, n);
    const double cy = rng.uniform(0, n);
    const double rx = rng.uniform(3, 10);
    const double ry = rng.uniform(3, 10);
    const double depth = rng.uniform(0.1, 0.3);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const double d2 = dx * dx + dy * dy;
        if (d2 < 4.0) image.at(0, y, x) *= static_cast<float>(1.0 - depth * std::exp(-d2));
      }
    }
  }

  // Cracks: meandering random walks stamped with a disk until the pixel
  // budget is spent.
  Mask mask(n, n);
  const double budget = cfg.foreground_fraction_target * area * rng.uniform(0.5, 1.5);
  std::size_t painted = 0;
  for (int crack = 0; crack < 32 && static_cast<double>(painted) < budget; ++crack) {
    double x = rng.uniform(0, n);
    double y = rng.uniform(0, n);
    double theta = rng.uniform(0, 2 * std::numbers::pi);
    const double width = rng.uniform(1.0, 5.0);
    while (static_cast<double>(painted) < budget && x >= 0 && y >= 0 && x < n && y < n) {
      const double local = std::clamp(width + rng.normal() * 0.3, 1.0, 5.0);
      painted += stamp_disk(mask, x, y, std::max(0.5, local / 2.0));
      theta += rng.normal() * 0.15;
      x += std::cos(theta);
      y += std::sin(theta);
    }
  }
  const double contrast = rng.uniform(0.35, 0.6);
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask.data[i]) image.data()[i] *= static_cast<float>(1.0 - contrast);
  }
  for (float& v : image.vec()) {
    v = std::clamp(v + static_cast<float>(cfg.noise_level * rng.normal()), 0.0f, 1.0f);
  }

  ImageSample s;
  s.id = "crack_" + std::to_string(index);
  s.image = std::move(image);
  s.mask = std::move(mask);
  s.labeled = true;
  return s;
}

struct Point {
  double x;
  double y;
};

double distance_to_segment(Point p, Point a, Point b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx);
  const double dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

ImageSample make_road(const SynthConfig& cfg, int index) {
  Rng rng = Rng::derive(cfg.seed, {0x726f6164ULL, static_cast<std::uint64_t>(index)});
  const int n = cfg.image_size;
  const auto area = static_cast<double>(n) * n;

  // Quadratic Bezier from one border to the opposite one.
  const bool horizontal = rng.uniform() < 0.5;
  Point p0{}, p2{};
  if (horizontal) {
    p0 = {-2.0, rng.uniform(0.1 * n, 0.9 * n)};
    p2 = {n + 2.0, rng.uniform(0.1 * n, 0.9 * n)};
  } else {
    p0 = {rng.uniform(0.1 * n, 0.9 * n), -2.0};
    p2 = {rng.uniform(0.1 * n, 0.9 * n), n + 2.0};
  }
  const Point p1{rng.uniform(0.2 * n, 0.8 * n), rng.uniform(0.2 * n, 0.8 * n)};
  std::vector<Point> path;
  const int samples = 4 * n;
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples;
    const double u = 1 - t;
    path.push_back({u * u * p0.x + 2 * u * t * p1.x + t * t * p2.x,
                    u * u * p0.y + 2 * u * t * p1.y + t * t * p2.y});
  }
  double length = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    length += std::hypot(path[i].x - path[i - 1].x, path[i].y - path[i - 1].y);
  }
  const double budget = cfg.foreground_fraction_target * area * rng.uniform(0.7, 1.3);
  const double width = std::max(2.0, budget / std::max(1.0, length * 0.9));

  Mask surface(n, n);
  std::vector<float> dist(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const Point p{x + 0.5, y + 0.5};
      double best = 1e30;
      for (std::size_t i = 1; i < path.size(); ++i) {
        best = std::min(best, distance_to_segment(p, path[i - 1], path[i]));
      }
      dist[static_cast<std::size_t>(y) * n + x] = static_cast<float>(best);
      if (best <= width / 2) surface.at(y, x) = 1;
    }
  }
  Mask centerline(n, n);
  for (const Point& p : path) {
    const int x = static_cast<int>(std::floor(p.x));
    const int y = static_cast<int>(std::floor(p.y));
    if (x >= 0 && y >= 0 && x < n && y < n && surface.at(y, x)) centerline.at(y, x) = 1;
  }
  Mask edge = boundary_mask(surface);

  // Vegetation-like background, asphalt road with a light center marking.
  const auto coarse = value_noise(rng, n, 4);
  const auto fine = value_noise(rng, n, 24);
  const double bg[3] = {rng.uniform(0.25, 0.45), rng.uniform(0.35, 0.6), rng.uniform(0.2, 0.35)};
  const double asphalt = rng.uniform(0.35, 0.6);
  Tensor image(3, n, n);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * n + x;
        double v = bg[c] + 0.1 * coarse[i] + 0.06 * fine[i];
        if (surface.data[i]) {
          v = asphalt + 0.03 * fine[i];
          if (edge.data[i]) v += 0.08;
          if (centerline.data[i]) v = 0.85;
        }
        image.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  for (float& v : image.vec()) {
    v = std::clamp(v + static_cast<float>(cfg.noise_level * rng.normal()), 0.0f, 1.0f);
  }

  ImageSample s;
  s.id = "road_" + std::to_string(index);
  s.image = std::move(image);
  s.mask = std::move(surface);
  s.labeled = true;
  s.extra_masks.emplace("edge", std::move(edge));
  s.extra_masks.emplace("centerline", std::move(centerline));
  return s;
}

}  // namespace

Mask boundary_mask(const Mask& surface) {
  Mask edge(surface.height, surface.width);
  for (int y = 0; y < surface.height; ++y) {
    for (int x = 0; x < surface.width; ++x) {
      if (!surface.at(y, x)) continue;
      const bool inner = (y == 0 || surface.at(y - 1, x)) && (y == surface.height - 1 || surface.at(y + 1, x)) &&
                         (x == 0 || surface.at(y, x - 1)) && (x == surface.width - 1 || surface.at(y, x + 1));
      if (!inner) edge.at(y, x) = 1;
    }
  }
  return edge;
}

std::vector<ImageSample> generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<ImageSample> out(static_cast<std::size_t>(cfg.n_images));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.n_images; ++i) {
    out[static_cast<std::size_t>(i)] = cfg.task == SynthTask::crack ? make_crack(cfg, i) : make_road(cfg, i);
  }
  return out;
}

double mean_foreground_fraction(std::span<const ImageSample> samples) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (!s.mask) continue;
    sum += static_cast<double>(s.mask->count()) / static_cast<double>(s.mask->data.size());
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

DatasetSplit make_split(std::span<const std::string> ids, double label_fraction, std::uint64_t seed) {
  if (ids.empty()) throw ArgumentError("make_split: empty id list");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) {
    throw ArgumentError("make_split: label_fraction must be in (0, 1]");
  }
  const std::size_t total = ids.size();
  const auto wanted = static_cast<std::size_t>(std::llround(label_fraction * static_cast<double>(total)));
  const std::size_t n_labeled = std::clamp<std::size_t>(wanted, 1, total);

  // Partial Fisher-Yates over positions.
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, {0x73706c6974ULL});
  for (std::size_t i = 0; i < n_labeled; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(total - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> chosen(total, false);
  for (std::size_t i = 0; i < n_labeled; ++i) chosen[order[i]] = true;

  DatasetSplit split;
  split.label_fraction = label_fraction;
  split.seed = seed;
  for (std::size_t i = 0; i < total; ++i) {
    (chosen[i] ? split.labeled_ids : split.unlabeled_ids).push_back(ids[i]);
  }
  return split;
}

std::vector<const ImageSample*> select(std::span<const ImageSample> samples,
                                       std::span<const std::string> ids) {
  std::unordered_map<std::string, const ImageSample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<const ImageSample*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ArgumentError("unknown sample id '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

namespace {

const std::map<std::string, std::string>& extra_dirs() {
  static const std::map<std::string, std::string> dirs{{"edge", "edges"}, {"centerline", "centerlines"}};
  return dirs;
}

}  // namespace

void save_dataset(std::span<const ImageSample> samples, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  std::ofstream manifest(root / "manifest.tsv");
  if (!manifest) throw FormatError("cannot write " + (root / "manifest.tsv").string());
  manifest << "id\tlabeled\n";
  for (const auto& s : samples) {
    s.validate();
    write_png(root / "images" / (s.id + ".png"), s.image);
    if (s.mask) write_mask_png(root / "masks" / (s.id + ".png"), *s.mask);
    for (const auto& [name, m] : s.extra_masks) {
      const auto it = extra_dirs().find(name);
      const fs::path dir = root / (it != extra_dirs().end() ? it->second : name);
      fs::create_directories(dir);
      write_mask_png(dir / (s.id + ".png"), m);
    }
    manifest << s.id << '\t' << (s.labeled ? 1 : 0) << '\n';
  }
}

std::vector<ImageSample> load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root / "images")) throw FormatError("missing directory " + (root / "images").string());

  // (id, listed-as-labeled); without a manifest, labeled follows mask presence.
  std::vector<std::pair<std::string, std::optional<bool>>> rows;
  const fs::path manifest_path = root / "manifest.tsv";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || (line_no == 1 && line.rfind("id\t", 0) == 0)) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError("manifest.tsv:" + std::to_string(line_no) + ": expected id<TAB>labeled");
      const std::string flag = line.substr(tab + 1);
      if (flag != "0" && flag != "1") throw FormatError("manifest.tsv:" + std::to_string(line_no) + ": labeled must be 0 or 1");
      rows.emplace_back(line.substr(0, tab), flag == "1");
    }
  } else {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root / "images")) {
      if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    for (auto& id : ids) rows.emplace_back(std::move(id), std::nullopt);
  }

  std::vector<ImageSample> samples;
  samples.reserve(rows.size());
  for (const auto& [id, listed] : rows) {
    ImageSample s;
    s.id = id;
    const fs::path image_path = root / "images" / (id + ".png");
    if (!fs::exists(image_path)) throw FormatError("missing image " + image_path.string());
    s.image = read_png(image_path);
    const fs::path mask_path = root / "masks" / (id + ".png");
    const bool has_mask = fs::exists(mask_path);
    if (listed.value_or(has_mask)) {
      if (!has_mask) throw FormatError("sample " + id + " is labeled but has no mask");
      Mask m = read_mask_png(mask_path);
      if (m.height != s.image.height() || m.width != s.image.width()) {
        throw FormatError("sample " + id + ": mask shape differs from image");
      }
      s.mask = std::move(m);
      s.labeled = true;
      for (const auto& [name, dir] : extra_dirs()) {
        const fs::path p = root / dir / (id + ".png");
        if (!fs::exists(p)) continue;
        Mask extra = read_mask_png(p);
        if (extra.height != s.image.height() || extra.width != s.image.width()) {
          throw FormatError("sample " + id + ": " + name + " mask shape differs from image");
        }
        s.extra_masks.emplace(name, std::move(extra));
      }
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace crseg
