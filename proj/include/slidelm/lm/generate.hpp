#pragma once

#include <span>
#include <vector>

#include "slidelm/interpret/attention_trace.hpp"
#include "slidelm/lm/decoder.hpp"

namespace slidelm {

struct GenerationConfig {
  std::size_t max_len = 64;
  bool capture_attention = true;
};

struct GenerationResult {
  std::vector<std::size_t> ids;  // without the terminating EOS
  bool hit_eos = false;
  AttentionTrace trace;          // one step per emitted token, including EOS
};

/// Greedy decoding over normal tokens and EOS; argmax ties go to the lowest
/// id. Stops at EOS, after max_len tokens, or when the text span is full.
/// Throws UsageError when max_len is 0.
GenerationResult generate(const Decoder& decoder, const Var& visual, std::span<const std::size_t> prompt,
                          const GenerationConfig& cfg = {});

}  // namespace slidelm
