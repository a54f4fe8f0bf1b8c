#include "slidelm/training/overfit_probe.hpp"

#include "slidelm/encoder/patch_encoder.hpp"

namespace slidelm {

OverfitProbeConfig default_overfit_probe(std::size_t slides, std::uint64_t seed) {
  OverfitProbeConfig c;
  c.slides = slides;
  c.seed = seed;
  c.model.patch.dim = 32;
  c.model.patch.patch_size = 32;
  c.model.encoder.dim = 64;
  c.model.encoder.heads = 4;
  c.model.encoder.layers = 2;
  c.model.encoder.branches = {{16, 1}, {32, 2}, {64, 4}};
  c.model.lm.dim = 64;
  c.model.lm.heads = 4;
  c.model.lm.layers = 2;
  c.model.lm.max_text_len = 64;
  c.stage1 = StageConfig::defaults(1);
  c.stage1.seed = seed;
  c.stage2 = StageConfig::defaults(2);
  c.stage2.seed = seed;
  // The paper-scale stage-2 lr assumes a pretrained LM; a randomly initialised
  // toy LM needs a larger step and many epochs to memorise the captions.
  c.stage2.optimizer.lr = 5e-4;
  c.stage2.epochs = 250;
  c.stage2.max_steps = 2000;
  return c;
}

OverfitProbeResult overfit_probe(const OverfitProbeConfig& cfg) {
  const auto cases = synthetic_cases(cfg.slides, cfg.seed, cfg.model.patch.patch_size);
  std::vector<std::string> texts{kDescribePrompt};
  for (const auto& c : cases) texts.push_back(c.caption);
  SlideLanguageModel model(cfg.model, Vocab::build(texts), cfg.seed);

  SlideFeatureMap slides;
  std::vector<TrainSample> captions, vqa;
  for (const auto& c : cases) {
    const SynthSlide s = synth_slide(cfg.seed + 1, c.spec);
    const PatchGrid grid = tile_slide(s.raster, c.spec.patch_size);
    slides[c.slide_id] = {model.patch_encoder().encode_slide(s.raster, grid), grid.tissue_entries()};
    captions.push_back({c.slide_id, TaskKind::caption, kDescribePrompt, c.caption});
    vqa.push_back({c.slide_id, TaskKind::vqa, kDescribePrompt, c.caption});
  }

  OverfitProbeResult r;
  r.lm_checksum_initial = model.params().checksum("lm");
  r.patch_checksum_initial = model.params().checksum("patch_encoder");
  for (const auto& l : run_stage(model, cfg.stage1, captions, slides).losses) r.stage1_losses.push_back(l.loss);
  r.lm_checksum_after_stage1 = model.params().checksum("lm");
  for (const auto& l : run_stage(model, cfg.stage2, vqa, slides, std::nullopt, r.stage1_losses.size()).losses)
    r.stage2_losses.push_back(l.loss);
  r.lm_checksum_final = model.params().checksum("lm");
  r.patch_checksum_final = model.params().checksum("patch_encoder");

  double total = 0.0;
  for (const auto& c : cases) {
    const SlideFeatures& f = slides.at(c.slide_id);
    total += model.loss(f.embeddings, f.tiles, kDescribePrompt, c.caption).value().item();
    const auto gen = model.generate(f.embeddings, f.tiles, kDescribePrompt, {.max_len = cfg.max_len, .capture_attention = false});
    const std::string text = model.vocab().detokenize(gen.ids);
    r.expected.push_back(c.caption);
    r.generated.push_back(text);
    if (gen.hit_eos && text == c.caption) ++r.exact_matches;
  }
  r.total = cases.size();
  r.final_loss = total / static_cast<double>(cases.size());
  return r;
}

}  // namespace slidelm
