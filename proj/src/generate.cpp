#include "slidelm/lm/generate.hpp"

#include "slidelm/error.hpp"

namespace slidelm {

GenerationResult generate(const Decoder& decoder, const Var& visual, std::span<const std::size_t> prompt,
                          const GenerationConfig& cfg) {
  if (cfg.max_len == 0) throw UsageError("generate: max_len must be >= 1");
  const auto& dc = decoder.config();
  MultimodalSequence seq = assemble(visual, prompt, std::nullopt, dc.dim);
  GenerationResult res;
  AttentionTrace& tr = res.trace;
  tr.layers = dc.layers;
  tr.heads = dc.heads;
  tr.n_patches = seq.n_visual;
  const std::size_t text_len = seq.length() - seq.n_visual;
  for (std::size_t step = 0; step < cfg.max_len && text_len + step < dc.max_text_len; ++step) {
    AttentionCapture cap;
    const Var logits = decoder.forward(seq, cfg.capture_attention ? &cap : nullptr);
    const std::size_t last = seq.length() - 1;
    const auto row = logits.value().row(last);
    std::size_t best = Vocab::kEos;
    for (std::size_t id = Vocab::kSpecialCount; id < row.size(); ++id)
      if (row[id] > row[best] || (row[id] == row[best] && id < best)) best = id;
    tr.tokens.push_back(best);
    if (cfg.capture_attention) {
      for (std::size_t l = 0; l < dc.layers; ++l)
        for (std::size_t h = 0; h < dc.heads; ++h) {
          const Tensor& a = cap.attention[l][h];
          for (std::size_t n = 0; n < seq.n_visual; ++n) tr.weights.push_back(a(last, seq.first_visual() + n));
        }
    }
    if (best == Vocab::kEos) {
      res.hit_eos = true;
      break;
    }
    res.ids.push_back(best);
    append_token(seq, best);
  }
  if (!cfg.capture_attention) tr.n_patches = 0;
  return res;
}

}  // namespace slidelm
