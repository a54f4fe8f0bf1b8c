#include "slidelm/model/model.hpp"

#include <sstream>

#include "slidelm/numerics/ops.hpp"
#include "slidelm/util/json_config.hpp"

namespace slidelm {
namespace {

std::string positional_name(PositionalMode m) { return m == PositionalMode::grid2d ? "grid2d" : "none"; }

}  // namespace

void ModelConfig::finalize(std::size_t vocab_size) {
  encoder.input_dim = patch.dim;
  projector.input_dim = bypass_slide_encoder ? patch.dim : encoder.dim;
  projector.output_dim = lm.dim;
  lm.vocab_size = vocab_size;
  if (patch.dim == 0) throw ConfigError("model.patch_encoder.dim", "must be positive");
  if (!bypass_slide_encoder) encoder.validate("model.encoder");
  projector.validate("model.projector");
  lm.validate("model.lm");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : encoder.branches) branches.push_back({{"segment", b.segment}, {"dilation", b.dilation}});
  return {
      {"patch_encoder", {{"dim", patch.dim}, {"patch_size", patch.patch_size}, {"seed", patch.seed}}},
      {"encoder",
       {{"dim", encoder.dim},
        {"heads", encoder.heads},
        {"layers", encoder.layers},
        {"ffn_mult", encoder.ffn_mult},
        {"branches", branches},
        {"positional", positional_name(encoder.positional)},
        {"max_grid", encoder.max_grid}}},
      {"bypass_slide_encoder", bypass_slide_encoder},
      {"projector", {{"layers", projector.layers}, {"hidden", projector.hidden}}},
      {"lm",
       {{"dim", lm.dim},
        {"layers", lm.layers},
        {"heads", lm.heads},
        {"ffn_mult", lm.ffn_mult},
        {"max_text_len", lm.max_text_len},
        {"tied_head", lm.tied_head},
        {"prefix_bidirectional", lm.prefix_bidirectional}}},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, const std::string& path) {
  ModelConfig c;
  ConfigReader r(j, path);
  if (r.has("patch_encoder")) {
    auto p = r.object("patch_encoder");
    p.read("dim", c.patch.dim);
    p.read("patch_size", c.patch.patch_size);
    p.read("seed", c.patch.seed);
    p.finish();
  }
  if (r.has("encoder")) {
    auto e = r.object("encoder");
    e.read("dim", c.encoder.dim);
    e.read("heads", c.encoder.heads);
    e.read("layers", c.encoder.layers);
    e.read("ffn_mult", c.encoder.ffn_mult);
    e.read("max_grid", c.encoder.max_grid);
    if (e.has("positional")) {
      std::string m;
      e.read("positional", m);
      if (m == "none") c.encoder.positional = PositionalMode::none;
      else if (m == "grid2d") c.encoder.positional = PositionalMode::grid2d;
      else throw ConfigError(e.key_path("positional"), "expected \"none\" or \"grid2d\", got \"" + m + "\"");
    }
    if (e.has("branches")) {
      const auto& arr = e.at("branches");
      if (!arr.is_array()) throw ConfigError(e.key_path("branches"), "expected an array");
      c.encoder.branches.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        ConfigReader b(arr[i], e.key_path("branches") + "[" + std::to_string(i) + "]");
        DilationBranch br{0, 0};
        b.read("segment", br.segment);
        b.read("dilation", br.dilation);
        b.finish();
        c.encoder.branches.push_back(br);
      }
    }
    e.finish();
  }
  r.read("bypass_slide_encoder", c.bypass_slide_encoder);
  if (r.has("projector")) {
    auto p = r.object("projector");
    p.read("layers", c.projector.layers);
    p.read("hidden", c.projector.hidden);
    p.finish();
  }
  if (r.has("lm")) {
    auto l = r.object("lm");
    l.read("dim", c.lm.dim);
    l.read("layers", c.lm.layers);
    l.read("heads", c.lm.heads);
    l.read("ffn_mult", c.lm.ffn_mult);
    l.read("max_text_len", c.lm.max_text_len);
    l.read("tied_head", c.lm.tied_head);
    l.read("prefix_bidirectional", c.lm.prefix_bidirectional);
    l.finish();
  }
  r.finish();
  return c;
}

SlideLanguageModel::SlideLanguageModel(ModelConfig cfg, Vocab vocab, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.finalize(vocab_.size());
  Rng rng(seed);
  patch_ = std::make_unique<PatchEncoder>(params_, cfg_.patch);
  if (!cfg_.bypass_slide_encoder) {
    Rng r = rng.split("slide_encoder");
    slide_ = std::make_unique<SlideEncoder>(params_, cfg_.encoder, r);
  }
  Rng pr = rng.split("projector");
  projector_ = std::make_unique<Projector>(params_, cfg_.projector, pr);
  Rng lr = rng.split("lm");
  decoder_ = std::make_unique<Decoder>(params_, cfg_.lm, lr);
}

Var SlideLanguageModel::visual_tokens(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles,
                                      SlideEncoderTrace* trace) const {
  if (e.values.empty()) throw UsageError("slide has no patch embeddings");
  if (e.dim() != cfg_.patch.dim)
    throw ConfigError("model.patch_encoder.dim",
                      "embedding dim " + std::to_string(e.dim()) + " != " + std::to_string(cfg_.patch.dim));
  const Var x = ops::constant(e.values);
  return projector_->forward(slide_ ? slide_->forward(x, tiles, trace) : x);
}

MultimodalSequence SlideLanguageModel::sequence(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles,
                                                const std::string& prompt,
                                                const std::optional<std::string>& answer) const {
  const auto p = vocab_.tokenize(prompt);
  if (!answer) return assemble(visual_tokens(e, tiles), p, std::nullopt, cfg_.lm.dim);
  const auto a = vocab_.tokenize(*answer);
  return assemble(visual_tokens(e, tiles), p, std::span<const std::size_t>(a), cfg_.lm.dim);
}

Var SlideLanguageModel::loss(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles, const std::string& prompt,
                             const std::string& answer) const {
  const auto seq = sequence(e, tiles, prompt, answer);
  return answer_loss(decoder_->forward(seq), seq);
}

GenerationResult SlideLanguageModel::generate(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles,
                                              const std::string& prompt, const GenerationConfig& gen) const {
  const auto p = vocab_.tokenize(prompt);
  return slidelm::generate(*decoder_, visual_tokens(e, tiles), p, gen);
}

Checkpoint SlideLanguageModel::checkpoint(std::map<std::string, std::string> metadata) const {
  std::string vocab;
  for (const auto& t : vocab_.tokens()) vocab += t + "\n";
  metadata["model_config"] = cfg_.to_json().dump();
  metadata["vocab"] = vocab;
  return make_checkpoint(params_, std::move(metadata));
}

SlideLanguageModel SlideLanguageModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto cfg_it = ckpt.metadata.find("model_config");
  const auto vocab_it = ckpt.metadata.find("vocab");
  if (cfg_it == ckpt.metadata.end() || vocab_it == ckpt.metadata.end())
    throw LoadError("checkpoint lacks model_config/vocab metadata");
  std::vector<std::string> tokens;
  std::istringstream in(vocab_it->second);
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg_it->second);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint model_config: ") + e.what());
  }
  SlideLanguageModel m(ModelConfig::from_json(j), Vocab::from_tokens(tokens), 0);
  restore_parameters(m.params_, ckpt);
  return m;
}

}  // namespace slidelm
