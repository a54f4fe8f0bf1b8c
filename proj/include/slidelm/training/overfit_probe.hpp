#pragma once

#include <string>
#include <vector>

#include "slidelm/training/synthetic_corpus.hpp"

namespace slidelm {

struct OverfitProbeConfig {
  std::size_t slides = 8;
  std::uint64_t seed = 0;
  ModelConfig model;
  StageConfig stage1;
  StageConfig stage2;
  std::size_t max_len = 24;
};

/// Small model on 32-pixel tiles; stage 1 at its defaults, stage 2 with a
/// raised lr and enough steps to memorise `slides` captions.
OverfitProbeConfig default_overfit_probe(std::size_t slides = 8, std::uint64_t seed = 0);

struct OverfitProbeResult {
  std::vector<double> stage1_losses;
  std::vector<double> stage2_losses;
  double final_loss = 0.0;  // mean answer-span CE over all slides after training
  std::size_t exact_matches = 0;
  std::size_t total = 0;
  std::vector<std::string> expected;
  std::vector<std::string> generated;
  std::string lm_checksum_initial, lm_checksum_after_stage1, lm_checksum_final;
  std::string patch_checksum_initial, patch_checksum_final;
};

OverfitProbeResult overfit_probe(const OverfitProbeConfig& cfg);

}  // namespace slidelm
