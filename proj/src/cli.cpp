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

#include "crseg/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "crseg/config.hpp"
#include "crseg/data_model.hpp"
#include "crseg/errors.hpp"
#include "crseg/evaluation.hpp"
#include "crseg/image_io.hpp"
#include "crseg/network.hpp"
#include "crseg/trainer.hpp"

namespace fs = std::filesystem;

namespace crseg::cli {
namespace {

constexpr const char* kUsage =
    "usage: crseg <verb> [--key value ...]\n"
    "verbs:\n"
    "  gen-data  --task crack|road --n N --seed S --out DIR [--size 128] [--fg-fraction 0.02] [--noise 0.05]\n"
    "  train     --config FILE [--out DIR] [--mode semi|sup_only] [--seed S] [--label-fraction F] [--<key> value]\n"
    "  eval      --config FILE --checkpoint PATH --data DIR [--out DIR]\n"
    "  predict   --checkpoint PATH --data DIR --out DIR [--threshold T]\n"
    "  plot-log  --log FILE [--validation FILE] --out DIR\n";

constexpr std::array<const char*, 3> kRoadNets{"surface", "edge", "centerline"};

// "--label-fraction 0.1" -> {"label_fraction", "0.1"}.
KeyValues parse_flags(const std::vector<std::string>& args, std::size_t first) {
  KeyValues kv;
  for (std::size_t i = first; i < args.size(); i += 2) {
    const std::string& flag = args[i];
    if (flag.size() < 3 || flag.rfind("--", 0) != 0) throw ConfigError("expected --key, got '" + flag + "'");
    if (i + 1 >= args.size()) throw ConfigError("missing value for " + flag);
    std::string key = flag.substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    kv[key] = args[i + 1];
  }
  return kv;
}

class Options {
 public:
  explicit Options(KeyValues kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string str(const std::string& key) const {
    used_.insert(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required option --" + key);
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }
  double real(const std::string& key, double fallback) const {
    return has(key) ? parse_double(key, str(key)) : fallback;
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? parse_int(key, str(key)) : fallback;
  }
  std::uint64_t uinteger(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? parse_uint(key, str(key)) : fallback;
  }
  const KeyValues& all() const { return kv_; }
  void mark_used(const std::string& key) const { used_.insert(key); }
  void reject_unused() const {
    for (const auto& [k, v] : kv_) {
      if (!used_.count(k)) throw ConfigError("unknown option '" + k + "'");
    }
  }

 private:
  KeyValues kv_;
  mutable std::set<std::string> used_;
};

// Config file values overlaid with command-line flags.
Options load_options(const std::vector<std::string>& args, bool needs_config) {
  KeyValues flags = parse_flags(args, 1);
  KeyValues merged;
  const auto cfg = flags.find("config");
  if (cfg != flags.end()) {
    if (!fs::is_regular_file(cfg->second)) throw ConfigError("config file not found: " + cfg->second);
    merged = read_key_value_file(cfg->second);
    flags.erase(cfg);
  } else if (needs_config) {
    throw ConfigError("--config is required");
  }
  for (auto& [k, v] : flags) merged[k] = v;
  return Options(std::move(merged));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

CRSegConfig network_config(const Options& opt, int in_channels) {
  CRSegConfig nc;
  nc.in_channels = in_channels;
  nc.base_width = static_cast<int>(opt.integer("base_width", nc.base_width));
  nc.embed_dim = static_cast<int>(opt.integer("embed_dim", nc.embed_dim));
  try {
    nc.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return nc;
}

TrainConfig train_config(const Options& opt) {
  TrainConfig cfg;
  for (const auto& [k, v] : opt.all()) {
    if (cfg.set(k, v)) opt.mark_used(k);
  }
  cfg.validate();
  return cfg;
}

// Full-image surface probabilities appended as an extra input channel, with
// the named extra mask as the target.
std::vector<ImageSample> cascade_dataset(const CRSeg& surface, std::span<const ImageSample> samples,
                                         const std::string& target) {
  std::vector<ImageSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    ImageSample d;
    d.id = s.id;
    d.image = concat_channels(s.image, surface.forward(s.image).fused_prob);
    d.labeled = s.labeled;
    if (s.labeled) {
      const auto it = s.extra_masks.find(target);
      if (it == s.extra_masks.end()) throw FormatError("sample " + s.id + " has no " + target + " mask");
      d.mask = it->second;
    }
    out.push_back(std::move(d));
  }
  return out;
}

int cmd_gen_data(const std::vector<std::string>& args, std::ostream& out) {
  const Options opt = load_options(args, false);
  SynthConfig sc;
  sc.task = parse_task(opt.str("task", "crack"));
  sc.n_images = static_cast<int>(opt.integer("n", 100));
  sc.seed = opt.uinteger("seed", 0);
  sc.image_size = static_cast<int>(opt.integer("size", sc.image_size));
  sc.foreground_fraction_target = opt.real("fg_fraction", sc.foreground_fraction_target);
  sc.noise_level = opt.real("noise", sc.noise_level);
  const fs::path root = opt.str("out");
  opt.reject_unused();
  sc.validate();
  const auto samples = generate_synthetic_dataset(sc);
  save_dataset(samples, root);
  out << "wrote " << samples.size() << " " << to_string(sc.task) << " images to " << root.string() << "\n";
  return 0;
}

struct TrainedNet {
  std::string name;
  CRSeg model;
  TrainLog log;
};

TrainedNet train_one(const std::string& name, const CRSegConfig& nc, std::span<const ImageSample> data,
                     const DatasetSplit& split, const TrainConfig& cfg, std::span<const ImageSample> val,
                     const fs::path& out_dir, int checkpoint_every, std::ostream& out) {
  CRSeg model(nc, cfg.seed);
  TrainHooks hooks;
  hooks.on_epoch_end = [&](int epoch, const CRSeg& m, const TrainLog& log) {
    const StepRecord& last = log.steps.back();
    out << name << " epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << last.losses.total;
    if (!log.validation.empty() && log.validation.back().epoch == epoch) {
      out << " val_miou " << log.validation.back().best_miou;
    }
    out << "\n";
    if (checkpoint_every > 0 && (epoch + 1) % checkpoint_every == 0) {
      std::ostringstream file;
      file << name << "_epoch_" << std::setw(4) << std::setfill('0') << epoch + 1 << ".ckpt";
      save_checkpoint(m, out_dir / "checkpoints" / file.str());
    }
  };
  TrainLog log = train(model, data, split, cfg, val, hooks);
  return TrainedNet{name, std::move(model), std::move(log)};
}

void write_logs(const TrainedNet& net, const fs::path& dir, const std::string& suffix) {
  std::ostringstream log;
  write_train_log_csv(log, net.log);
  write_text(dir / ("train_log" + suffix + ".csv"), log.str());
  std::ostringstream val;
  write_validation_csv(val, net.log);
  write_text(dir / ("validation" + suffix + ".csv"), val.str());
  save_checkpoint(net.model, dir / (net.name + ".ckpt"));
}

int cmd_train(const std::vector<std::string>& args, std::ostream& out) {
  const Options opt = load_options(args, true);
  const TrainConfig cfg = train_config(opt);
  const SynthTask task = parse_task(opt.str("task", "crack"));
  const fs::path data_dir = opt.str("data");
  const fs::path out_dir = opt.str("out", "run");
  const double label_fraction = opt.real("label_fraction", 0.1);
  const int checkpoint_every = static_cast<int>(opt.integer("checkpoint_every", 0));
  const std::string val_dir = opt.str("val", "");
  const int n_train = static_cast<int>(opt.integer("n_train", 0));
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw ConfigError("label_fraction must be in (0, 1]");
  // Network keys are read inside network_config.
  opt.mark_used("base_width");
  opt.mark_used("embed_dim");
  opt.reject_unused();

  std::vector<ImageSample> data = load_dataset(data_dir);
  if (n_train > 0 && static_cast<std::size_t>(n_train) < data.size()) data.resize(static_cast<std::size_t>(n_train));
  if (data.empty()) throw FormatError("dataset " + data_dir.string() + " is empty");
  std::vector<std::string> labelable;
  std::vector<std::string> unlabeled;
  for (const auto& s : data) (s.mask ? labelable : unlabeled).push_back(s.id);
  if (labelable.empty()) throw FormatError("dataset " + data_dir.string() + " has no masks");
  DatasetSplit split = make_split(labelable, label_fraction, cfg.seed);
  split.unlabeled_ids.insert(split.unlabeled_ids.end(), unlabeled.begin(), unlabeled.end());
  // Labels outside the split are hidden from the trainer.
  const std::set<std::string> keep(split.labeled_ids.begin(), split.labeled_ids.end());
  for (auto& s : data) {
    if (s.mask && !keep.count(s.id)) {
      s.mask.reset();
      s.labeled = false;
    }
  }
  std::vector<ImageSample> val;
  if (!val_dir.empty()) val = load_dataset(val_dir);

  fs::create_directories(out_dir);
  if (checkpoint_every > 0) fs::create_directories(out_dir / "checkpoints");
  {
    std::ostringstream resolved;
    for (const auto& [k, v] : cfg.to_key_values()) resolved << k << " = " << v << "\n";
    resolved << "label_fraction = " << label_fraction << "\ntask = " << to_string(task) << "\n";
    write_text(out_dir / "config.resolved", resolved.str());
    std::ostringstream ids;
    for (const auto& id : split.labeled_ids) ids << id << "\n";
    write_text(out_dir / "labeled_ids.txt", ids.str());
  }

  const int channels = data.front().image.channels();
  if (task == SynthTask::crack) {
    const TrainedNet net = train_one("model", network_config(opt, channels), data, split, cfg, val, out_dir,
                                     checkpoint_every, out);
    write_logs(net, out_dir, "");
  } else {
    const TrainedNet surface = train_one("surface", network_config(opt, channels), data, split, cfg, val, out_dir,
                                         checkpoint_every, out);
    write_logs(surface, out_dir, "_surface");
    for (const std::string name : {"edge", "centerline"}) {
      const auto cdata = cascade_dataset(surface.model, data, name);
      std::vector<ImageSample> cval;
      if (!val.empty()) cval = cascade_dataset(surface.model, val, name);
      const TrainedNet net = train_one(name, network_config(opt, channels + 1), cdata, split, cfg, cval, out_dir,
                                       checkpoint_every, out);
      write_logs(net, out_dir, "_" + name);
    }
  }
  out << "training finished; outputs in " << out_dir.string() << "\n";
  return 0;
}

// Either a single checkpoint file or a directory holding surface/edge/centerline.
struct LoadedModels {
  std::vector<CRSeg> nets;  // one for crack, three for road
  [[nodiscard]] bool road() const { return nets.size() == 3; }
};

LoadedModels load_models(const fs::path& path) {
  LoadedModels m;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "surface.ckpt")) {
      for (const char* name : kRoadNets) m.nets.push_back(load_checkpoint(path / (std::string(name) + ".ckpt")));
    } else {
      m.nets.push_back(load_checkpoint(path / "model.ckpt"));
    }
  } else {
    m.nets.push_back(load_checkpoint(path));
  }
  return m;
}

void write_report(const fs::path& dir, const std::string& suffix, const EvalReport& report) {
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text(dir / ("eval_report" + suffix + ".csv"), csv.str());
  std::ostringstream summary;
  write_report_summary(summary, report);
  write_text(dir / ("eval_summary" + suffix + ".csv"), summary.str());
}

int cmd_eval(const std::vector<std::string>& args, std::ostream& out) {
  const Options opt = load_options(args, true);
  const fs::path checkpoint = opt.str("checkpoint");
  const fs::path data_dir = opt.str("data");
  const fs::path out_dir = opt.str("out", ".");
  // A config shared with `train` may carry training keys; they are ignored here.
  for (const auto& [k, v] : opt.all()) {
    if (TrainConfig{}.set(k, v) || k == "task" || k == "label_fraction" || k == "val" || k == "base_width" ||
        k == "embed_dim" || k == "checkpoint_every" || k == "n_train") {
      opt.mark_used(k);
    }
  }
  opt.reject_unused();

  const LoadedModels models = load_models(checkpoint);
  std::vector<ImageSample> data = load_dataset(data_dir);
  std::erase_if(data, [](const ImageSample& s) { return !s.mask; });
  if (data.empty()) throw FormatError("no labeled images in " + data_dir.string());
  fs::create_directories(out_dir);
  if (!models.road()) {
    const EvalReport report = evaluate_model(models.nets[0], data);
    write_report(out_dir, "", report);
    out << "best_threshold " << report.best_threshold << " best_miou " << report.best_miou << "\n";
    return 0;
  }
  const EvalReport surface = evaluate_model(models.nets[0], data);
  write_report(out_dir, "_surface", surface);
  out << "surface best_threshold " << surface.best_threshold << " best_miou " << surface.best_miou << "\n";
  for (std::size_t k = 1; k < 3; ++k) {
    const auto cdata = cascade_dataset(models.nets[0], data, kRoadNets[k]);
    const EvalReport report = evaluate_model(models.nets[k], cdata);
    write_report(out_dir, std::string("_") + kRoadNets[k], report);
    out << kRoadNets[k] << " best_threshold " << report.best_threshold << " best_miou " << report.best_miou << "\n";
  }
  return 0;
}

Mask binarize(const Tensor& prob, double threshold) {
  Mask m(prob.height(), prob.width());
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = prob.data()[i] >= threshold ? 1 : 0;
  return m;
}

int cmd_predict(const std::vector<std::string>& args, std::ostream& out) {
  const Options opt = load_options(args, false);
  const fs::path checkpoint = opt.str("checkpoint");
  const fs::path data_dir = opt.str("data");
  const fs::path out_dir = opt.str("out");
  const double threshold = opt.real("threshold", 0.5);
  opt.reject_unused();
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");

  const LoadedModels models = load_models(checkpoint);
  const std::vector<ImageSample> data = load_dataset(data_dir);
  fs::create_directories(out_dir);
  for (const auto& s : data) {
    if (!models.road()) {
      const Tensor prob = models.nets[0].forward(s.image).fused_prob;
      write_png(out_dir / (s.id + "_prob.png"), prob);
      write_mask_png(out_dir / (s.id + "_mask.png"), binarize(prob, threshold));
      continue;
    }
    const RoadMaps maps = road_cascade_forward(models.nets[0], models.nets[1], models.nets[2], s.image);
    const std::array<const Tensor*, 3> probs{&maps.surface, &maps.edge, &maps.centerline};
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string stem = s.id + "_" + kRoadNets[k];
      write_png(out_dir / (stem + "_prob.png"), *probs[k]);
      write_mask_png(out_dir / (stem + "_mask.png"), binarize(*probs[k], threshold));
    }
  }
  out << "wrote predictions for " << data.size() << " images to " << out_dir.string() << "\n";
  return 0;
}

struct Series {
  std::string name;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

std::string svg_plot(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(y)) continue;
      if (first) {
        x0 = x1 = x;
        y0 = y1 = y;
        first = false;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const double pw = kW - kLeft - kRight;
  const double ph = kH - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kLeft << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double yv = y0 + (y1 - y0) * t / 4.0;
    const double xv = x0 + (x1 - x0) * t / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << yv << "</text>\n"
        << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << xv << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << x_label << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points) {
      if (std::isfinite(y)) svg << px(x) << "," << py(y) << " ";
    }
    svg << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k + 1);
    svg << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kW - kRight + 30 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kW - kRight + 36 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int cmd_plot_log(const std::vector<std::string>& args, std::ostream& out) {
  const Options opt = load_options(args, false);
  const fs::path log_path = opt.str("log");
  const std::string val_path = opt.str("validation", "");
  const fs::path out_dir = opt.str("out");
  opt.reject_unused();

  std::ifstream log_in(log_path);
  if (!log_in) throw FormatError("cannot open " + log_path.string());
  const auto steps = read_train_log_csv(log_in);
  std::vector<Series> losses{{"total", "#000000", {}},        {"contrast", "#1f77b4", {}},
                             {"balance", "#ff7f0e", {}},      {"construction", "#2ca02c", {}},
                             {"weight_decay", "#d62728", {}}};
  for (const auto& r : steps) {
    const auto x = static_cast<double>(r.step);
    losses[0].points.emplace_back(x, r.losses.total);
    losses[1].points.emplace_back(x, r.losses.contrast);
    losses[2].points.emplace_back(x, r.losses.balance);
    losses[3].points.emplace_back(x, r.losses.construction);
    losses[4].points.emplace_back(x, r.losses.weight_decay);
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "loss.svg", svg_plot("training loss", "step", losses));
  out << "wrote " << (out_dir / "loss.svg").string() << "\n";

  if (!val_path.empty()) {
    std::ifstream val_in(val_path);
    if (!val_in) throw FormatError("cannot open " + val_path);
    Series miou{"best MIOU", "#9467bd", {}};
    for (const auto& v : read_validation_csv(val_in)) miou.points.emplace_back(v.epoch + 1, v.best_miou);
    write_text(out_dir / "miou.svg", svg_plot("validation MIOU", "epoch", {miou}));
    out << "wrote " << (out_dir / "miou.svg").string() << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
    (args.empty() ? err : out) << kUsage;
    return args.empty() ? 1 : 0;
  }
  const std::string& verb = args[0];
  try {
    if (verb == "gen-data") return cmd_gen_data(args, out);
    if (verb == "train") return cmd_train(args, out);
    if (verb == "eval") return cmd_eval(args, out);
    if (verb == "predict") return cmd_predict(args, out);
    if (verb == "plot-log") return cmd_plot_log(args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return 3;
  } catch (const ArgumentError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "format error: " << e.what() << "\n";
    return 3;
  }
  err << "unknown verb '" << verb << "'\n" << kUsage;
  return 1;
}

}  // namespace crseg::cli
