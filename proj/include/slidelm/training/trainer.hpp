#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slidelm/model/model.hpp"
#include "slidelm/numerics/adamw.hpp"

namespace slidelm {

enum class TaskKind { caption, vqa };

std::string to_string(TaskKind k);
/// Throws UsageError on anything other than "caption" / "vqa".
TaskKind parse_task_kind(const std::string& s);

struct TrainSample {
  std::string slide_id;
  TaskKind kind = TaskKind::caption;
  std::string prompt;
  std::string target;
};

/// Line-delimited JSON {"slide_id", "task", "prompt", "target"}. Throws
/// LoadError on malformed lines.
std::vector<TrainSample> read_train_samples(const std::string& path);
void write_train_samples(const std::string& path, const std::vector<TrainSample>& samples);

/// Patch features of one slide plus the grid tiles they came from.
struct SlideFeatures {
  EmbeddingMatrix embeddings;
  std::vector<PatchEntry> tiles;
};
using SlideFeatureMap = std::map<std::string, SlideFeatures>;

struct StageConfig {
  int stage = 1;
  std::size_t epochs = 3;
  std::vector<std::string> trainable{"slide_encoder", "projector"};
  std::size_t grad_accum = 1;  // samples per optimizer step
  std::uint64_t seed = 0;
  /// Stop after this many optimizer steps; 0 runs every epoch in full.
  std::size_t max_steps = 0;
  AdamWConfig optimizer{.lr = 1e-3};

  /// Stage 1: slide encoder + projector, lr 1e-3, 3 epochs.
  /// Stage 2: slide encoder + projector + LM, lr 2e-5, 1 epoch.
  static StageConfig defaults(int stage);
  /// Throws ConfigError on a bad stage id, zero epochs/accumulation, negative
  /// lr, an unknown group, or a trainable patch encoder.
  void validate(const std::string& prefix = "train") const;
};

struct LossRecord {
  std::size_t step = 0;  // global optimizer step, 1-based
  int stage = 1;
  double loss = 0.0;     // mean over the step's micro-batches
};

struct StageResult {
  std::vector<LossRecord> losses;
  std::vector<std::string> checkpoints;  // stage{K}_epoch{E}.ckpt, in order
  std::string best_checkpoint;           // stage{K}_best.ckpt (lowest epoch-mean loss)
  std::vector<double> epoch_mean_loss;
};

/// Thrown when a loss turns NaN/inf; training state is left as it was at the
/// failing step.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Samples of the task kind a stage trains on by default (captions for
/// stage 1, VQA for stage 2).
std::vector<TrainSample> samples_for_stage(const std::vector<TrainSample>& all, int stage);

/// AdamW over the configured trainable groups with a seeded shuffle per epoch
/// and batch size one. Other groups are frozen for the run. When `out_dir` is
/// set, writes a checkpoint after each epoch and one for the best epoch.
/// Throws UsageError on an empty dataset or a sample whose slide is unknown.
StageResult run_stage(SlideLanguageModel& model, const StageConfig& cfg, const std::vector<TrainSample>& data,
                      const SlideFeatureMap& slides, const std::optional<std::string>& out_dir = std::nullopt,
                      std::size_t step_offset = 0);

/// CSV with header `step,stage,loss`; loss printed with 17 significant digits.
void write_loss_csv(const std::string& path, const std::vector<LossRecord>& losses);

/// True when the median of each successive `window`-step block is at most
/// (1 + tolerance) times the previous block's median.
bool loss_trend_non_increasing(const std::vector<double>& losses, std::size_t window = 100, double tolerance = 0.05);

}  // namespace slidelm
