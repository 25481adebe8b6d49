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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "crseg/data_model.hpp"
#include "crseg/errors.hpp"
#include "crseg/image_io.hpp"
#include "crseg/random.hpp"

using namespace crseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("crseg_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("img" + std::to_string(i));
  return ids;
}

}  // namespace

TEST_CASE("empty synthetic dataset") {
  SynthConfig c;
  c.n_images = 0;
  CHECK(generate_synthetic_dataset(c).empty());
}

TEST_CASE("crack density lands near the target") {
  SynthConfig c;
  c.task = SynthTask::crack;
  c.n_images = 100;
  c.foreground_fraction_target = 0.02;
  c.seed = 7;
  const auto samples = generate_synthetic_dataset(c);
  REQUIRE(samples.size() == 100);
  const double density = mean_foreground_fraction(samples);
  CHECK(density >= 0.01);
  CHECK(density <= 0.03);
  for (const auto& s : samples) {
    CHECK(s.labeled);
    CHECK_NOTHROW(s.validate());
    CHECK(s.image.channels() == 1);
  }
}

TEST_CASE("density stays within half of the target across settings") {
  for (SynthTask task : {SynthTask::crack, SynthTask::road}) {
    for (double target : {0.02, 0.05, 0.15}) {
      if (task == SynthTask::road && target < 0.05) continue;
      SynthConfig c;
      c.task = task;
      c.n_images = 40;
      c.foreground_fraction_target = target;
      c.seed = 3;
      const double density = mean_foreground_fraction(generate_synthetic_dataset(c));
      CHECK(density >= 0.5 * target);
      CHECK(density <= 1.5 * target);
    }
  }
}

TEST_CASE("generation is deterministic and seed dependent") {
  SynthConfig c;
  c.n_images = 6;
  c.seed = 11;
  for (SynthTask task : {SynthTask::crack, SynthTask::road}) {
    c.task = task;
    const auto a = generate_synthetic_dataset(c);
    const auto b = generate_synthetic_dataset(c);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image == b[i].image);
      CHECK(*a[i].mask == *b[i].mask);
      CHECK(a[i].extra_masks == b[i].extra_masks);
    }
    SynthConfig other = c;
    other.seed = 12;
    CHECK_FALSE(generate_synthetic_dataset(other)[0].image == a[0].image);
  }
}

TEST_CASE("road extras: centerline inside surface, edges on the boundary") {
  SynthConfig c;
  c.task = SynthTask::road;
  c.n_images = 20;
  c.foreground_fraction_target = 0.15;
  c.seed = 5;
  for (const auto& s : generate_synthetic_dataset(c)) {
    REQUIRE(s.image.channels() == 3);
    const Mask& surface = *s.mask;
    const Mask& center = s.extra_masks.at("centerline");
    const Mask& edge = s.extra_masks.at("edge");
    CHECK(center.count() > 0);
    CHECK(edge.count() > 0);
    for (int y = 0; y < surface.height; ++y) {
      for (int x = 0; x < surface.width; ++x) {
        if (center.at(y, x)) CHECK(surface.at(y, x) == 1);
        if (!edge.at(y, x)) continue;
        // Within distance 1 of a surface/background transition.
        bool near_boundary = false;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= surface.height || xx >= surface.width) continue;
            near_boundary = near_boundary || surface.at(yy, xx) != surface.at(y, x);
          }
        }
        CHECK(near_boundary);
      }
    }
  }
}

TEST_CASE("synth config validation") {
  SynthConfig c;
  c.image_size = 16;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.foreground_fraction_target = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.foreground_fraction_target = 0.0;
  CHECK_THROWS_AS((void)generate_synthetic_dataset(c), ConfigError);
  CHECK_THROWS_AS((void)parse_task("river"), ConfigError);
  CHECK(parse_task("road") == SynthTask::road);
}

TEST_CASE("split examples") {
  const auto ids200 = make_ids(200);
  CHECK(make_split(ids200, 0.035, 1).labeled_ids.size() == 7);
  const auto ids10 = make_ids(10);
  CHECK(make_split(ids10, 0.001, 1).labeled_ids.size() == 1);
  const auto full = make_split(ids10, 1.0, 4);
  CHECK(full.labeled_ids == ids10);
  CHECK(full.unlabeled_ids.empty());
  CHECK_THROWS_AS((void)make_split(std::vector<std::string>{}, 0.5, 1), ArgumentError);
  CHECK_THROWS_AS((void)make_split(ids10, 0.0, 1), ArgumentError);
  CHECK_THROWS_AS((void)make_split(ids10, 1.5, 1), ArgumentError);
}

TEST_CASE("split properties over 1000 random draws") {
  Rng rng(99);
  for (int t = 0; t < 1000; ++t) {
    const auto ids = make_ids(1 + rng.index(300));
    const double frac = rng.uniform(1e-4, 1.0);
    const std::uint64_t seed = rng.next();
    const DatasetSplit s = make_split(ids, frac, seed);
    const auto expected = std::max<long long>(1, std::llround(frac * static_cast<double>(ids.size())));
    REQUIRE(static_cast<long long>(s.labeled_ids.size()) == std::min<long long>(expected, ids.size()));
    REQUIRE(s.labeled_ids.size() + s.unlabeled_ids.size() == ids.size());
    std::set<std::string> all(s.labeled_ids.begin(), s.labeled_ids.end());
    for (const auto& id : s.unlabeled_ids) REQUIRE(all.insert(id).second);
    REQUIRE(all == std::set<std::string>(ids.begin(), ids.end()));
    const DatasetSplit again = make_split(ids, frac, seed);
    REQUIRE(again.labeled_ids == s.labeled_ids);
    REQUIRE(again.unlabeled_ids == s.unlabeled_ids);
  }
}

TEST_CASE("dataset round trip") {
  SynthConfig c;
  c.task = SynthTask::road;
  c.n_images = 4;
  c.image_size = 48;
  c.foreground_fraction_target = 0.15;
  c.seed = 21;
  auto samples = generate_synthetic_dataset(c);
  samples[3].mask.reset();
  samples[3].labeled = false;
  samples[3].extra_masks.clear();
  const fs::path root = scratch("roundtrip");
  save_dataset(samples, root);
  const auto loaded = load_dataset(root);
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].id == samples[i].id);
    CHECK(loaded[i].labeled == samples[i].labeled);
    CHECK(loaded[i].mask == samples[i].mask);
    CHECK(loaded[i].extra_masks == samples[i].extra_masks);
    REQUIRE(loaded[i].image.dims() == samples[i].image.dims());
    for (std::size_t k = 0; k < samples[i].image.size(); ++k) {
      CHECK(std::abs(loaded[i].image.data()[k] - samples[i].image.data()[k]) <= 0.5f / 255.0f + 1e-6f);
    }
  }
  // Saving the loaded set and loading again reproduces masks exactly.
  const fs::path root2 = scratch("roundtrip2");
  save_dataset(loaded, root2);
  const auto again = load_dataset(root2);
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(again[i].mask == loaded[i].mask);
    CHECK(again[i].image == loaded[i].image);
  }
  fs::remove_all(root);
  fs::remove_all(root2);
}

TEST_CASE("images without masks load as unlabeled when there is no manifest") {
  const fs::path root = scratch("nomanifest");
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  Tensor img(1, 32, 32, 0.5f);
  write_png(root / "images" / "a.png", img);
  write_png(root / "images" / "b.png", img);
  Mask m(32, 32);
  m.at(3, 4) = 1;
  write_mask_png(root / "masks" / "a.png", m);
  const auto s = load_dataset(root);
  REQUIRE(s.size() == 2);
  CHECK(s[0].labeled);
  CHECK(*s[0].mask == m);
  CHECK_FALSE(s[1].labeled);
  CHECK_FALSE(s[1].mask.has_value());
  fs::remove_all(root);
}

TEST_CASE("dataset format errors") {
  const fs::path root = scratch("badformat");
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  write_png(root / "images" / "a.png", Tensor(1, 128, 128, 0.5f));
  write_mask_png(root / "masks" / "a.png", Mask(64, 64));
  CHECK_THROWS_AS((void)load_dataset(root), FormatError);
  fs::remove(root / "masks" / "a.png");
  std::ofstream(root / "manifest.tsv") << "id\tlabeled\na\t1\n";
  CHECK_THROWS_AS((void)load_dataset(root), FormatError);
  std::ofstream(root / "manifest.tsv") << "id\tlabeled\na\tyes\n";
  CHECK_THROWS_AS((void)load_dataset(root), FormatError);
  std::ofstream(root / "images" / "a.png") << "not a png";
  std::ofstream(root / "manifest.tsv") << "id\tlabeled\na\t0\n";
  CHECK_THROWS_AS((void)load_dataset(root), FormatError);
  CHECK_THROWS_AS((void)load_dataset(root / "missing"), FormatError);
  fs::remove_all(root);
}

TEST_CASE("sample invariants") {
  ImageSample s;
  s.id = "x";
  s.image = Tensor(1, 4, 4, 0.5f);
  s.labeled = true;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s.mask = Mask(4, 4);
  CHECK_NOTHROW(s.validate());
  s.mask = Mask(4, 3);
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s.mask = Mask(4, 4);
  s.mask->data[0] = 2;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
  s.mask->data[0] = 1;
  s.image.data()[0] = 1.5f;
  CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("boundary mask marks surface pixels touching background") {
  Mask m(5, 5);
  for (int y = 1; y <= 3; ++y) {
    for (int x = 1; x <= 3; ++x) m.at(y, x) = 1;
  }
  const Mask b = boundary_mask(m);
  CHECK(b.count() == 8);
  CHECK(b.at(2, 2) == 0);
  CHECK(b.at(1, 1) == 1);
}
