#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slidelm/lm/vocab.hpp"
#include "slidelm/numerics/parameters.hpp"

namespace slidelm {

/// Token layout: [IMG_START, v1..vN, IMG_END, BOS, prompt..., answer..., EOS].
/// Visual positions carry projected embeddings instead of token ids (their id
/// slot holds PAD). The loss mask is true exactly on answer tokens and EOS.
struct MultimodalSequence {
  Var visual;  // [N×D_lm]
  std::vector<std::size_t> ids;
  std::vector<std::uint8_t> loss_mask;
  std::size_t n_visual = 0;
  std::size_t prompt_begin = 0;
  std::size_t answer_begin = 0;  // == length() when there is no answer

  std::size_t length() const noexcept { return ids.size(); }
  bool is_visual(std::size_t pos) const noexcept { return pos >= 1 && pos <= n_visual; }
  std::size_t first_visual() const noexcept { return 1; }
};

/// Throws UsageError on an empty prompt or a visual width other than
/// `expected_dim` (when non-zero). With no answer, the sequence ends after the
/// prompt and the mask is all false.
MultimodalSequence assemble(const Var& visual, std::span<const std::size_t> prompt,
                            std::optional<std::span<const std::size_t>> answer, std::size_t expected_dim = 0);

/// Appends one generated token after the current end of `seq`.
void append_token(MultimodalSequence& seq, std::size_t id);

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t dim = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
  std::size_t max_text_len = 256;  // learned text positions
  bool tied_head = false;
  /// Visual positions attend to each other in both directions; when false the
  /// whole sequence is strictly causal.
  bool prefix_bidirectional = true;

  void validate(const std::string& prefix = "lm") const;
};

/// attention[layer][head] is the T×T probability matrix of a forward pass.
struct AttentionCapture {
  std::vector<std::vector<Tensor>> attention;
};

/// Pre-norm transformer decoder over a visual prefix plus text tokens.
class Decoder {
 public:
  Decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng);

  /// Logits [T×V]. Throws UsageError when the text span exceeds max_text_len.
  Var forward(const MultimodalSequence& seq, AttentionCapture* capture = nullptr) const;

  /// Attention mask [T×T] (1 = allowed) used by forward.
  std::vector<std::uint8_t> attention_mask(const MultimodalSequence& seq) const;

  const DecoderConfig& config() const noexcept { return cfg_; }

 private:
  struct Block {
    Parameter ln1_gain, ln1_bias, wq, wk, wv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2, b2;
  };

  DecoderConfig cfg_;
  Parameter tok_emb_, pos_emb_, lnf_gain_, lnf_bias_, head_w_, head_b_;
  std::vector<Block> blocks_;
};

/// Mean next-token cross-entropy over masked positions: logits row p-1
/// predicts token p for every p with loss_mask[p].
Var answer_loss(const Var& logits, const MultimodalSequence& seq);

}  // namespace slidelm
