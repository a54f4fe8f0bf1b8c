#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slidelm/slide_io/synth.hpp"
#include "slidelm/training/trainer.hpp"

namespace slidelm {

/// A generated slide whose caption is a function of its tissue-kind counts.
struct SyntheticCase {
  std::string slide_id;
  SynthSpec spec;
  std::map<TissueKind, std::size_t> counts;  // tissue tiles per kind
  std::string caption;
};

/// Caption listing each present kind by count, most frequent first, ties by
/// kind name: "two tumor tiles and one stroma tile".
std::string caption_for_counts(const std::map<TissueKind, std::size_t>& counts);

/// `k` slides on a `grid`×`grid` tile layout whose tissue-kind counts have
/// pairwise distinct proportions (so captions differ and are recoverable from
/// averaged features). Throws UsageError when `k`
/// exceeds the number of distinct multisets available.
std::vector<SyntheticCase> synthetic_cases(std::size_t k, std::uint64_t seed, std::size_t patch_size = 224,
                                           std::size_t grid = 2);

/// Prompt shared by the generated caption and VQA samples.
inline constexpr const char* kDescribePrompt = "describe the slide";

}  // namespace slidelm
