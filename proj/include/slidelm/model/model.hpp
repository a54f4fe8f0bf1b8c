#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <nlohmann/json.hpp>

#include "slidelm/encoder/patch_encoder.hpp"
#include "slidelm/encoder/slide_encoder.hpp"
#include "slidelm/lm/decoder.hpp"
#include "slidelm/lm/generate.hpp"
#include "slidelm/lm/vocab.hpp"
#include "slidelm/numerics/checkpoint.hpp"

namespace slidelm {

struct ModelConfig {
  PatchEncoderConfig patch;
  SlideEncoderConfig encoder;
  ProjectorConfig projector;
  DecoderConfig lm;
  /// Feed patch embeddings straight to the projector; the slide encoder is
  /// never constructed, so its parameters are absent from checkpoints.
  bool bypass_slide_encoder = false;

  /// Derives the coupled widths (encoder input, projector in/out, vocab size)
  /// and validates every section.
  void finalize(std::size_t vocab_size);

  nlohmann::json to_json() const;
  /// Strict: unknown keys raise ConfigError with their key path. Missing keys
  /// keep defaults.
  static ModelConfig from_json(const nlohmann::json& j, const std::string& path = "model");
};

/// Patch encoder → (slide encoder) → projector → decoder.
class SlideLanguageModel {
 public:
  SlideLanguageModel(ModelConfig cfg, Vocab vocab, std::uint64_t seed);

  Var visual_tokens(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles = {},
                    SlideEncoderTrace* trace = nullptr) const;
  MultimodalSequence sequence(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles,
                              const std::string& prompt, const std::optional<std::string>& answer) const;
  Var loss(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles, const std::string& prompt,
           const std::string& answer) const;
  GenerationResult generate(const EmbeddingMatrix& e, std::span<const PatchEntry> tiles, const std::string& prompt,
                            const GenerationConfig& gen = {}) const;

  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  const Vocab& vocab() const noexcept { return vocab_; }
  const PatchEncoder& patch_encoder() const { return *patch_; }
  const Decoder& decoder() const { return *decoder_; }
  const Projector& projector() const { return *projector_; }
  Projector& projector() { return *projector_; }
  const SlideEncoder* slide_encoder() const { return slide_.get(); }

  /// Checkpoint with the model config and vocab embedded in its metadata.
  Checkpoint checkpoint(std::map<std::string, std::string> metadata = {}) const;
  /// Rebuilds config, vocab and weights from a checkpoint written by `checkpoint`.
  static SlideLanguageModel from_checkpoint(const Checkpoint& ckpt);

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  ParameterStore params_;
  std::unique_ptr<PatchEncoder> patch_;
  std::unique_ptr<SlideEncoder> slide_;
  std::unique_ptr<Projector> projector_;
  std::unique_ptr<Decoder> decoder_;
};

}  // namespace slidelm
