#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slidelm/error.hpp"
#include "slidelm/training/overfit_probe.hpp"

namespace slidelm {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct ToyData {
  std::vector<SyntheticCase> cases;
  SlideFeatureMap slides;
  std::vector<TrainSample> samples;
};

ModelConfig toy_model() {
  ModelConfig m = default_overfit_probe().model;
  m.encoder.dim = 16;
  m.lm.dim = 16;
  m.lm.heads = 2;
  m.encoder.heads = 2;
  return m;
}

ToyData toy_data(const SlideLanguageModel& model, std::size_t k) {
  ToyData d;
  d.cases = synthetic_cases(k, 11, model.config().patch.patch_size);
  for (const auto& c : d.cases) {
    const auto s = synth_slide(2, c.spec);
    const auto grid = tile_slide(s.raster, c.spec.patch_size);
    d.slides[c.slide_id] = {model.patch_encoder().encode_slide(s.raster, grid), grid.tissue_entries()};
    d.samples.push_back({c.slide_id, TaskKind::caption, kDescribePrompt, c.caption});
    d.samples.push_back({c.slide_id, TaskKind::vqa, kDescribePrompt, c.caption});
  }
  return d;
}

Vocab toy_vocab(std::size_t k) {
  std::vector<std::string> texts{kDescribePrompt};
  for (const auto& c : synthetic_cases(k, 11, 32)) texts.push_back(c.caption);
  return Vocab::build(texts);
}

TEST(StageConfig, PaperDefaults) {
  const auto s1 = StageConfig::defaults(1), s2 = StageConfig::defaults(2);
  EXPECT_DOUBLE_EQ(s1.optimizer.lr, 0.001);
  EXPECT_EQ(s1.epochs, 3u);
  EXPECT_EQ(std::set<std::string>(s1.trainable.begin(), s1.trainable.end()),
            (std::set<std::string>{"slide_encoder", "projector"}));
  EXPECT_DOUBLE_EQ(s2.optimizer.lr, 0.00002);
  EXPECT_EQ(s2.epochs, 1u);
  EXPECT_EQ(std::set<std::string>(s2.trainable.begin(), s2.trainable.end()),
            (std::set<std::string>{"slide_encoder", "projector", "lm"}));
  EXPECT_DOUBLE_EQ(s1.optimizer.beta1, 0.9);
  EXPECT_DOUBLE_EQ(s1.optimizer.beta2, 0.999);
  EXPECT_DOUBLE_EQ(s1.optimizer.eps, 1e-8);
  EXPECT_DOUBLE_EQ(s1.optimizer.weight_decay, 0.01);
}

TEST(StageConfig, Validation) {
  auto c = StageConfig::defaults(1);
  c.trainable.push_back("patch_encoder");
  EXPECT_THROW(c.validate(), ConfigError);
  c = StageConfig::defaults(1);
  c.stage = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = StageConfig::defaults(1);
  c.trainable = {"decoder"};
  EXPECT_THROW(c.validate(), ConfigError);
  c = StageConfig::defaults(2);
  c.optimizer.lr = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Training, SamplesForStageSplitByKind) {
  std::vector<TrainSample> all{{"a", TaskKind::caption, "p", "t"}, {"a", TaskKind::vqa, "p", "t"}};
  EXPECT_EQ(samples_for_stage(all, 1).size(), 1u);
  EXPECT_EQ(samples_for_stage(all, 1)[0].kind, TaskKind::caption);
  EXPECT_EQ(samples_for_stage(all, 2)[0].kind, TaskKind::vqa);
}

TEST(Training, FreezeContractAcrossStages) {
  SlideLanguageModel model(toy_model(), toy_vocab(3), 1);
  const auto d = toy_data(model, 3);
  auto& p = model.params();
  const auto lm0 = p.checksum("lm"), pe0 = p.checksum("patch_encoder"), se0 = p.checksum("slide_encoder"),
             pj0 = p.checksum("projector");
  run_stage(model, StageConfig::defaults(1), samples_for_stage(d.samples, 1), d.slides);
  EXPECT_EQ(p.checksum("lm"), lm0);
  EXPECT_EQ(p.checksum("patch_encoder"), pe0);
  EXPECT_NE(p.checksum("slide_encoder"), se0);
  EXPECT_NE(p.checksum("projector"), pj0);
  run_stage(model, StageConfig::defaults(2), samples_for_stage(d.samples, 2), d.slides);
  EXPECT_EQ(p.checksum("patch_encoder"), pe0);
  EXPECT_NE(p.checksum("lm"), lm0);
}

TEST(Training, EmptyOrUnknownDataIsUsageError) {
  SlideLanguageModel model(toy_model(), toy_vocab(1), 1);
  const auto d = toy_data(model, 1);
  EXPECT_THROW(run_stage(model, StageConfig::defaults(1), {}, d.slides), UsageError);
  EXPECT_THROW(run_stage(model, StageConfig::defaults(1), {{"nope", TaskKind::caption, "p", "t"}}, d.slides),
               UsageError);
}

TEST(Training, ZeroLearningRateKeepsLossConstant) {
  SlideLanguageModel model(toy_model(), toy_vocab(1), 1);
  const auto d = toy_data(model, 1);
  auto cfg = StageConfig::defaults(2);
  cfg.optimizer.lr = 0.0;
  cfg.epochs = 5;
  const auto r = run_stage(model, cfg, samples_for_stage(d.samples, 2), d.slides);
  ASSERT_EQ(r.losses.size(), 5u);
  for (const auto& l : r.losses) EXPECT_EQ(l.loss, r.losses[0].loss);
}

TEST(Training, SameSeedGivesByteIdenticalCheckpoints) {
  const auto root = fs::temp_directory_path() / "slidelm_train_det";
  fs::remove_all(root);
  std::vector<std::vector<LossRecord>> curves;
  for (int run = 0; run < 2; ++run) {
    SlideLanguageModel model(toy_model(), toy_vocab(3), 4);
    const auto d = toy_data(model, 3);
    auto cfg = StageConfig::defaults(1);
    cfg.seed = 9;
    const auto r = run_stage(model, cfg, samples_for_stage(d.samples, 1), d.slides, (root / std::to_string(run)).string());
    ASSERT_EQ(r.checkpoints.size(), 3u);
    EXPECT_EQ(fs::path(r.checkpoints[2]).filename(), "stage1_epoch3.ckpt");
    EXPECT_TRUE(fs::exists(r.best_checkpoint));
    curves.push_back(r.losses);
  }
  for (const char* name : {"stage1_epoch1.ckpt", "stage1_epoch3.ckpt", "stage1_best.ckpt"})
    EXPECT_EQ(slurp(root / "0" / name), slurp(root / "1" / name)) << name;
  ASSERT_EQ(curves[0].size(), curves[1].size());
  for (std::size_t i = 0; i < curves[0].size(); ++i) EXPECT_EQ(curves[0][i].loss, curves[1][i].loss);
  fs::remove_all(root);
}

TEST(Training, DifferentSeedsShuffleDifferently) {
  std::vector<std::vector<double>> curves;
  for (std::uint64_t seed : {1u, 2u}) {
    SlideLanguageModel model(toy_model(), toy_vocab(6), 4);
    const auto d = toy_data(model, 6);
    auto cfg = StageConfig::defaults(1);
    cfg.seed = seed;
    cfg.epochs = 1;
    curves.emplace_back();
    for (const auto& l : run_stage(model, cfg, samples_for_stage(d.samples, 1), d.slides).losses)
      curves.back().push_back(l.loss);
  }
  EXPECT_NE(curves[0], curves[1]);
}

TEST(Training, GradientAccumulationGroupsSteps) {
  SlideLanguageModel model(toy_model(), toy_vocab(5), 1);
  const auto d = toy_data(model, 5);
  auto cfg = StageConfig::defaults(1);
  cfg.grad_accum = 2;
  cfg.epochs = 1;
  const auto r = run_stage(model, cfg, samples_for_stage(d.samples, 1), d.slides, std::nullopt, 10);
  ASSERT_EQ(r.losses.size(), 3u);
  EXPECT_EQ(r.losses.front().step, 11u);
  EXPECT_EQ(r.losses.back().step, 13u);
}

TEST(Training, NonFiniteLossAborts) {
  SlideLanguageModel model(toy_model(), toy_vocab(1), 1);
  const auto d = toy_data(model, 1);
  model.params().find("projector.b0")->value()[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run_stage(model, StageConfig::defaults(1), samples_for_stage(d.samples, 1), d.slides), NonFiniteLoss);
}

TEST(Training, LossCsvFormat) {
  const auto p = fs::temp_directory_path() / "slidelm_loss.csv";
  write_loss_csv(p.string(), {{1, 1, 0.5}, {2, 2, 0.25}});
  EXPECT_EQ(slurp(p), "step,stage,loss\n1,1,0.5\n2,2,0.25\n");
  fs::remove(p);
}

TEST(Training, LossTrendWindows) {
  std::vector<double> down(300);
  for (std::size_t i = 0; i < 300; ++i) down[i] = 1.0 / (1.0 + i);
  EXPECT_TRUE(loss_trend_non_increasing(down));
  std::vector<double> bump(down);
  for (std::size_t i = 200; i < 300; ++i) bump[i] = 1.0;
  EXPECT_FALSE(loss_trend_non_increasing(bump));
  std::vector<double> flat(300, 1.0);
  for (std::size_t i = 100; i < 200; ++i) flat[i] = 1.04;
  EXPECT_TRUE(loss_trend_non_increasing(flat));
}

TEST(SyntheticCorpus, CaptionWording) {
  EXPECT_EQ(caption_for_counts({{TissueKind::stroma, 1}, {TissueKind::tumor, 2}}), "two tumor tiles and one stroma tile");
  EXPECT_EQ(caption_for_counts({{TissueKind::necrosis, 1}, {TissueKind::lymphocytes, 1}}),
            "one lymphocytes tile and one necrosis tile");
  EXPECT_EQ(caption_for_counts({}), "no tissue");
}

TEST(SyntheticCorpus, CasesAreDistinctAndMatchTiles) {
  const auto cases = synthetic_cases(16, 5, 32);
  std::set<std::string> captions;
  for (const auto& c : cases) {
    captions.insert(c.caption);
    const auto s = synth_slide(1, c.spec);
    const auto grid = tile_slide(s.raster, 32);
    std::size_t tissue = 0;
    for (const auto& [k, n] : c.counts) tissue += n;
    EXPECT_EQ(grid.tissue_count(), tissue) << c.caption;
  }
  EXPECT_EQ(captions.size(), 16u);
  EXPECT_THROW(synthetic_cases(1000, 1, 32), UsageError);
}

TEST(OverfitProbe, SingleSlideIsMemorised) {
  auto cfg = default_overfit_probe(1, 3);
  cfg.stage2.max_steps = 300;
  const auto r = overfit_probe(cfg);
  EXPECT_EQ(r.exact_matches, 1u) << r.expected[0] << " vs " << r.generated[0];
  EXPECT_EQ(r.lm_checksum_initial, r.lm_checksum_after_stage1);
  EXPECT_EQ(r.patch_checksum_initial, r.patch_checksum_final);
}

}  // namespace
}  // namespace slidelm
