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
#include <sstream>

#include "crseg/cli.hpp"
#include "crseg/data_model.hpp"
#include "crseg/network.hpp"

using namespace crseg;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& name) : root(fs::temp_directory_path() / ("crseg_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& p) const { return (root / p).string(); }
};

int run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_config(const std::string& path, const std::string& data_dir) {
  std::ofstream(path) << "# tiny run\n"
                      << "data = " << data_dir << "\n"
                      << "epochs = 2\nbase_width = 8\nembed_dim = 4\ncrop_size = 32\n"
                      << "batch_labeled = 2\nbatch_unlabeled = 2\nnegatives = 8\nlabel_fraction = 0.25\n";
}

}  // namespace

TEST_CASE("usage and unknown verbs") {
  CHECK(run({}) == 1);
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("config and format errors map to exit codes") {
  Workspace w("errors");
  std::string err;
  CHECK(run({"train", "--config", w / "missing.cfg"}, &err) == 2);
  CHECK(err.find("config") != std::string::npos);
  CHECK(run({"train"}) == 2);
  CHECK(run({"gen-data", "--out", w / "d", "--task", "lake"}) == 2);
  CHECK(run({"gen-data", "--out", w / "d", "--n", "2", "--bogus", "1"}) == 2);
  CHECK(run({"gen-data", "--out"}) == 2);
  std::ofstream(w / "bad.cfg") << "this is not a key value line\n";
  CHECK(run({"train", "--config", w / "bad.cfg"}) == 2);
  write_config(w / "c.cfg", w / "nodata");
  CHECK(run({"train", "--config", w / "c.cfg"}) == 3);
  std::ofstream(w / "junk.ckpt") << "junk";
  CHECK(run({"gen-data", "--out", w / "d", "--n", "2", "--size", "32"}) == 0);
  CHECK(run({"eval", "--config", w / "c.cfg", "--checkpoint", w / "junk.ckpt", "--data", w / "d"}) == 3);
  std::ofstream(w / "log.csv") << "not,a,log\n";
  CHECK(run({"plot-log", "--log", w / "log.csv", "--out", w / "plots"}) == 3);
}

TEST_CASE("pipeline smoke: gen-data, train, eval, predict, plot-log") {
  Workspace w("pipeline");
  REQUIRE(run({"gen-data", "--task", "crack", "--n", "8", "--seed", "7", "--out", w / "d", "--size", "48"}) == 0);
  CHECK(fs::exists(w / "d/manifest.tsv"));
  CHECK(fs::exists(w / "d/images/crack_0.png"));
  CHECK(fs::exists(w / "d/masks/crack_0.png"));
  write_config(w / "c.cfg", w / "d");
  REQUIRE(run({"train", "--config", w / "c.cfg", "--out", w / "run", "--val", w / "d", "--checkpoint-every", "1"}) ==
          0);
  CHECK(fs::exists(w / "run/model.ckpt"));
  CHECK(fs::exists(w / "run/train_log.csv"));
  CHECK(fs::exists(w / "run/validation.csv"));
  CHECK(fs::exists(w / "run/checkpoints/model_epoch_0002.ckpt"));
  CHECK(slurp(w / "run/train_log.csv").rfind("step,epoch,contrast,balance,construction,weight_decay,total,lr\n", 0) ==
        0);
  REQUIRE(run({"eval", "--config", w / "c.cfg", "--checkpoint", w / "run/model.ckpt", "--data", w / "d", "--out",
               w / "eval"}) == 0);
  const std::string report = slurp(w / "eval/eval_report.csv");
  CHECK(report.rfind("threshold,iou_fg,iou_bg,miou\n", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 20);
  CHECK(slurp(w / "eval/eval_summary.csv").rfind("best_threshold,best_miou\n", 0) == 0);
  REQUIRE(run({"predict", "--checkpoint", w / "run", "--data", w / "d", "--out", w / "pred"}) == 0);
  CHECK(fs::exists(w / "pred/crack_3_prob.png"));
  CHECK(fs::exists(w / "pred/crack_3_mask.png"));
  REQUIRE(run({"plot-log", "--log", w / "run/train_log.csv", "--validation", w / "run/validation.csv", "--out",
               w / "plots"}) == 0);
  CHECK(slurp(w / "plots/loss.svg").find("<polyline") != std::string::npos);
  CHECK(fs::exists(w / "plots/miou.svg"));
}

TEST_CASE("same seed gives identical checkpoints; the seed flag changes them") {
  Workspace w("determinism");
  REQUIRE(run({"gen-data", "--n", "6", "--seed", "3", "--out", w / "d", "--size", "40"}) == 0);
  write_config(w / "c.cfg", w / "d");
  for (const char* out : {"r1", "r2"}) {
    REQUIRE(run({"train", "--config", w / "c.cfg", "--mode", "sup_only", "--seed", "11", "--out", w / out}) == 0);
  }
  REQUIRE(run({"train", "--config", w / "c.cfg", "--mode", "sup_only", "--seed", "12", "--out", w / "r3"}) == 0);
  CHECK(slurp(w / "r1/model.ckpt") == slurp(w / "r2/model.ckpt"));
  CHECK(slurp(w / "r1/train_log.csv") == slurp(w / "r2/train_log.csv"));
  CHECK(slurp(w / "r1/model.ckpt") != slurp(w / "r3/model.ckpt"));
}

TEST_CASE("untrained model scores near chance on default synthetic data") {
  Workspace w("chance");
  REQUIRE(run({"gen-data", "--task", "crack", "--n", "6", "--seed", "2", "--out", w / "d", "--size", "64"}) == 0);
  write_config(w / "c.cfg", w / "d");
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CRSegConfig nc;
    nc.base_width = 8;
    save_checkpoint(CRSeg(nc, seed), w / "untrained.ckpt");
    REQUIRE(run({"eval", "--config", w / "c.cfg", "--checkpoint", w / "untrained.ckpt", "--data", w / "d", "--out",
                 w / "e"}) == 0);
    std::istringstream summary(slurp(w / "e/eval_summary.csv"));
    std::string header, line;
    std::getline(summary, header);
    std::getline(summary, line);
    const double miou = std::stod(line.substr(line.find(',') + 1));
    CHECK(miou >= 0.35);
    CHECK(miou <= 0.65);
  }
}

TEST_CASE("road pipeline trains the cascade") {
  Workspace w("road");
  REQUIRE(run({"gen-data", "--task", "road", "--n", "6", "--seed", "5", "--out", w / "d", "--size", "32",
               "--fg-fraction", "0.2"}) == 0);
  CHECK(fs::exists(w / "d/edges/road_0.png"));
  CHECK(fs::exists(w / "d/centerlines/road_0.png"));
  write_config(w / "c.cfg", w / "d");
  REQUIRE(run({"train", "--config", w / "c.cfg", "--task", "road", "--out", w / "run", "--label-fraction", "0.5"}) ==
          0);
  for (const char* f : {"surface.ckpt", "edge.ckpt", "centerline.ckpt", "train_log_edge.csv"}) {
    CHECK(fs::exists(w / (std::string("run/") + f)));
  }
  REQUIRE(run({"eval", "--config", w / "c.cfg", "--checkpoint", w / "run", "--data", w / "d", "--out", w / "e"}) == 0);
  CHECK(fs::exists(w / "e/eval_report_centerline.csv"));
  REQUIRE(run({"predict", "--checkpoint", w / "run", "--data", w / "d", "--out", w / "p"}) == 0);
  CHECK(fs::exists(w / "p/road_0_edge_prob.png"));
}
