#include "slidelm/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"
#include "slidelm/numerics/ops.hpp"

namespace slidelm {
namespace {

const std::set<std::string>& known_groups() {
  static const std::set<std::string> g{"patch_encoder", "slide_encoder", "projector", "lm"};
  return g;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(TaskKind k) { return k == TaskKind::caption ? "caption" : "vqa"; }

TaskKind parse_task_kind(const std::string& s) {
  if (s == "caption") return TaskKind::caption;
  if (s == "vqa") return TaskKind::vqa;
  throw UsageError("unknown task kind '" + s + "'");
}

StageConfig StageConfig::defaults(int stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == 2) {
    c.epochs = 1;
    c.trainable = {"slide_encoder", "projector", "lm"};
    c.optimizer.lr = 2e-5;
  } else {
    c.epochs = 3;
    c.trainable = {"slide_encoder", "projector"};
    c.optimizer.lr = 1e-3;
  }
  return c;
}

void StageConfig::validate(const std::string& prefix) const {
  if (stage != 1 && stage != 2) throw ConfigError(prefix + ".stage", "must be 1 or 2");
  if (epochs == 0) throw ConfigError(prefix + ".epochs", "must be >= 1");
  if (grad_accum == 0) throw ConfigError(prefix + ".grad_accum", "must be >= 1");
  if (!(optimizer.lr >= 0.0) || !std::isfinite(optimizer.lr)) throw ConfigError(prefix + ".lr", "must be >= 0");
  for (const auto& g : trainable) {
    if (!known_groups().count(g)) throw ConfigError(prefix + ".trainable", "unknown group '" + g + "'");
    if (g == "patch_encoder") throw ConfigError(prefix + ".trainable", "the patch encoder is always frozen");
  }
}

std::vector<TrainSample> samples_for_stage(const std::vector<TrainSample>& all, int stage) {
  const TaskKind want = stage == 1 ? TaskKind::caption : TaskKind::vqa;
  std::vector<TrainSample> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out), [&](const auto& s) { return s.kind == want; });
  return out;
}

StageResult run_stage(SlideLanguageModel& model, const StageConfig& cfg, const std::vector<TrainSample>& data,
                      const SlideFeatureMap& slides, const std::optional<std::string>& out_dir,
                      std::size_t step_offset) {
  cfg.validate();
  if (data.empty()) throw UsageError("stage " + std::to_string(cfg.stage) + ": empty dataset");
  for (const auto& s : data)
    if (!slides.count(s.slide_id)) throw UsageError("training sample references unknown slide '" + s.slide_id + "'");

  ParameterStore& params = model.params();
  for (const auto& g : params.groups())
    params.set_group_trainable(g, std::find(cfg.trainable.begin(), cfg.trainable.end(), g) != cfg.trainable.end());
  std::vector<Parameter> trainable;
  for (const auto& p : params.all())
    if (p.trainable()) trainable.push_back(p);
  if (out_dir) std::filesystem::create_directories(*out_dir);

  AdamW opt(cfg.optimizer);
  StageResult res;
  Rng rng = Rng(cfg.seed).split("shuffle").split(static_cast<std::uint64_t>(cfg.stage));
  std::size_t step = step_offset;
  double best = std::numeric_limits<double>::infinity();
  bool done = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !done; ++epoch) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng er = rng.split(static_cast<std::uint64_t>(epoch));
    er.shuffle(order);
    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t i = 0; i < order.size() && !done; i += cfg.grad_accum) {
      const std::size_t end = std::min(order.size(), i + cfg.grad_accum);
      params.zero_grad();
      double step_loss = 0.0;
      for (std::size_t j = i; j < end; ++j) {
        const TrainSample& s = data[order[j]];
        const SlideFeatures& f = slides.at(s.slide_id);
        Var loss = model.loss(f.embeddings, f.tiles, s.prompt, s.target);
        const double v = loss.value().item();
        if (!std::isfinite(v))
          throw NonFiniteLoss("non-finite loss at stage " + std::to_string(cfg.stage) + " step " +
                              std::to_string(step + 1) + " (slide " + s.slide_id + ")");
        if (end - i > 1) loss = ops::scale(loss, 1.0 / static_cast<double>(end - i));
        if (!trainable.empty()) backward(loss);
        step_loss += v;
      }
      step_loss /= static_cast<double>(end - i);
      opt.step(trainable);
      ++step;
      res.losses.push_back({step, cfg.stage, step_loss});
      epoch_sum += step_loss;
      ++epoch_count;
      if (cfg.max_steps && step - step_offset >= cfg.max_steps) done = true;
    }
    const double mean = epoch_sum / static_cast<double>(std::max<std::size_t>(1, epoch_count));
    res.epoch_mean_loss.push_back(mean);
    if (out_dir) {
      const std::map<std::string, std::string> meta{{"stage", std::to_string(cfg.stage)},
                                                     {"epoch", std::to_string(epoch)},
                                                     {"step", std::to_string(step)},
                                                     {"seed", std::to_string(cfg.seed)}};
      const Checkpoint ck = model.checkpoint(meta);
      const auto base = std::filesystem::path(*out_dir) / ("stage" + std::to_string(cfg.stage));
      const std::string path = base.string() + "_epoch" + std::to_string(epoch) + ".ckpt";
      save_checkpoint(path, ck);
      res.checkpoints.push_back(path);
      if (mean < best) {
        best = mean;
        res.best_checkpoint = base.string() + "_best.ckpt";
        save_checkpoint(res.best_checkpoint, ck);
      }
    }
  }
  return res;
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& losses) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path + " for writing");
  f << "step,stage,loss\n" << std::setprecision(17);
  for (const auto& r : losses) f << r.step << ',' << r.stage << ',' << r.loss << '\n';
}

bool loss_trend_non_increasing(const std::vector<double>& losses, std::size_t window, double tolerance) {
  if (window == 0) throw UsageError("loss trend window must be positive");
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b + window <= losses.size(); b += window) {
    const double m = median({losses.begin() + static_cast<std::ptrdiff_t>(b),
                             losses.begin() + static_cast<std::ptrdiff_t>(b + window)});
    if (m > prev * (1.0 + tolerance)) return false;
    prev = m;
  }
  return true;
}

std::vector<TrainSample> read_train_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open training data '" + path + "'");
  std::vector<TrainSample> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      TrainSample s;
      s.slide_id = j.at("slide_id").get<std::string>();
      s.kind = parse_task_kind(j.at("task").get<std::string>());
      s.prompt = j.at("prompt").get<std::string>();
      s.target = j.at("target").get<std::string>();
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_train_samples(const std::string& path, const std::vector<TrainSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["slide_id"] = s.slide_id;
    j["task"] = to_string(s.kind);
    j["prompt"] = s.prompt;
    j["target"] = s.target;
    out << j.dump() << '\n';
  }
}

}  // namespace slidelm
