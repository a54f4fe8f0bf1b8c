#include "slidelm/lm/decoder.hpp"

#include <cmath>
#include <numeric>

#include "slidelm/error.hpp"
#include "slidelm/numerics/ops.hpp"

namespace slidelm {

MultimodalSequence assemble(const Var& visual, std::span<const std::size_t> prompt,
                            std::optional<std::span<const std::size_t>> answer, std::size_t expected_dim) {
  if (prompt.empty()) throw UsageError("assemble: empty prompt");
  if (!visual || visual.value().rank() != 2) throw UsageError("assemble: visual tokens must be an N×D matrix");
  if (expected_dim && visual.value().cols() != expected_dim)
    throw UsageError("assemble: visual width " + std::to_string(visual.value().cols()) + " != LM width " +
                     std::to_string(expected_dim));
  MultimodalSequence s;
  s.visual = visual;
  s.n_visual = visual.value().rows();
  s.ids.push_back(Vocab::kImgStart);
  s.ids.insert(s.ids.end(), s.n_visual, Vocab::kPad);
  s.ids.push_back(Vocab::kImgEnd);
  s.ids.push_back(Vocab::kBos);
  s.prompt_begin = s.ids.size();
  s.ids.insert(s.ids.end(), prompt.begin(), prompt.end());
  s.answer_begin = s.ids.size();
  s.loss_mask.assign(s.ids.size(), 0);
  if (answer) {
    s.ids.insert(s.ids.end(), answer->begin(), answer->end());
    s.ids.push_back(Vocab::kEos);
    s.loss_mask.resize(s.ids.size(), 1);
  }
  return s;
}

void append_token(MultimodalSequence& seq, std::size_t id) {
  seq.ids.push_back(id);
  seq.loss_mask.push_back(0);
}

void DecoderConfig::validate(const std::string& prefix) const {
  if (vocab_size <= Vocab::kSpecialCount) throw ConfigError(prefix + ".vocab_size", "vocab has no normal tokens");
  if (dim == 0) throw ConfigError(prefix + ".dim", "must be positive");
  if (heads == 0 || dim % heads != 0) throw ConfigError(prefix + ".heads", "must divide dim");
  if (ffn_mult == 0) throw ConfigError(prefix + ".ffn_mult", "must be positive");
  if (max_text_len < 4) throw ConfigError(prefix + ".max_text_len", "must be at least 4");
}

Decoder::Decoder(ParameterStore& store, const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg.dim, hidden = cfg.dim * cfg.ffn_mult;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    return store.add(name, init_uniform_fan_in(rng, in, out));
  };
  auto vec = [&](const std::string& name, std::size_t n, double fill) { return store.add(name, Tensor({n}, fill)); };
  // Embedding tables use the model width as fan-in so rows start at unit-ish scale.
  tok_emb_ = weight("lm.tok_emb", d, cfg.vocab_size);
  tok_emb_.value() = tok_emb_.value().reshaped({cfg.vocab_size, d});
  pos_emb_ = weight("lm.pos_emb", d, cfg.max_text_len);
  pos_emb_.value() = pos_emb_.value().reshaped({cfg.max_text_len, d});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "lm.block" + std::to_string(l) + ".";
    Block b;
    b.ln1_gain = vec(p + "ln1.gain", d, 1.0);
    b.ln1_bias = vec(p + "ln1.bias", d, 0.0);
    b.wq = weight(p + "attn.wq", d, d);
    b.wk = weight(p + "attn.wk", d, d);
    b.wv = weight(p + "attn.wv", d, d);
    b.wo = weight(p + "attn.wo", d, d);
    b.bo = vec(p + "attn.bo", d, 0.0);
    b.ln2_gain = vec(p + "ln2.gain", d, 1.0);
    b.ln2_bias = vec(p + "ln2.bias", d, 0.0);
    b.w1 = weight(p + "ffn.w1", d, hidden);
    b.b1 = vec(p + "ffn.b1", hidden, 0.0);
    b.w2 = weight(p + "ffn.w2", hidden, d);
    b.b2 = vec(p + "ffn.b2", d, 0.0);
    blocks_.push_back(std::move(b));
  }
  lnf_gain_ = vec("lm.final_ln.gain", d, 1.0);
  lnf_bias_ = vec("lm.final_ln.bias", d, 0.0);
  if (!cfg.tied_head) head_w_ = weight("lm.head.w", d, cfg.vocab_size);
  head_b_ = vec("lm.head.b", cfg.vocab_size, 0.0);
}

std::vector<std::uint8_t> Decoder::attention_mask(const MultimodalSequence& seq) const {
  const std::size_t t = seq.length();
  std::vector<std::uint8_t> m(t * t, 0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j)
      m[i * t + j] = j <= i || (cfg_.prefix_bidirectional && seq.is_visual(j));
  return m;
}

Var Decoder::forward(const MultimodalSequence& seq, AttentionCapture* capture) const {
  using namespace ops;
  const std::size_t t = seq.length(), d = cfg_.dim, dh = d / cfg_.heads;
  if (t < seq.n_visual + 1 || !seq.visual) throw UsageError("decoder: malformed sequence");
  if (seq.visual.value().cols() != d)
    throw UsageError("decoder: visual width " + std::to_string(seq.visual.value().cols()) + " != " + std::to_string(d));
  std::vector<std::size_t> text_ids;
  for (std::size_t p = 0; p < t; ++p) {
    if (seq.is_visual(p)) continue;
    if (seq.ids[p] >= cfg_.vocab_size) throw UsageError("decoder: token id out of range");
    text_ids.push_back(seq.ids[p]);
  }
  if (text_ids.size() > cfg_.max_text_len)
    throw UsageError("decoder: text span of " + std::to_string(text_ids.size()) + " exceeds max_text_len " +
                     std::to_string(cfg_.max_text_len));
  std::vector<std::size_t> positions(text_ids.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  const Var text = add(gather_rows(tok_emb_.var(), text_ids), gather_rows(pos_emb_.var(), positions));
  Var x = concat_rows({slice_rows(text, 0, 1), seq.visual, slice_rows(text, 1, text_ids.size())});

  const Mask mask = attention_mask(seq);
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  if (capture) capture->attention.assign(blocks_.size(), {});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const Var h = layer_norm(x, b.ln1_gain.var(), b.ln1_bias.var());
    const Var q = matmul(h, b.wq.var()), k = matmul(h, b.wk.var()), v = matmul(h, b.wv.var());
    std::vector<Var> heads;
    for (std::size_t hd = 0; hd < cfg_.heads; ++hd) {
      const Var qh = slice_cols(q, hd * dh, (hd + 1) * dh);
      const Var kh = slice_cols(k, hd * dh, (hd + 1) * dh);
      const Var vh = slice_cols(v, hd * dh, (hd + 1) * dh);
      const Var probs = softmax_rows(scale(matmul_nt(qh, kh), sc), mask);
      if (capture) capture->attention[l].push_back(probs.value());
      heads.push_back(matmul(probs, vh));
    }
    x = add(x, add_bias(matmul(concat_cols(heads), b.wo.var()), b.bo.var()));
    const Var h2 = layer_norm(x, b.ln2_gain.var(), b.ln2_bias.var());
    x = add(x, add_bias(matmul(gelu(add_bias(matmul(h2, b.w1.var()), b.b1.var())), b.w2.var()), b.b2.var()));
  }
  x = layer_norm(x, lnf_gain_.var(), lnf_bias_.var());
  const Var logits = cfg_.tied_head ? matmul_nt(x, tok_emb_.var()) : matmul(x, head_w_.var());
  return add_bias(logits, head_b_.var());
}

Var answer_loss(const Var& logits, const MultimodalSequence& seq) {
  const std::size_t t = seq.length();
  if (logits.value().rank() != 2 || logits.value().rows() != t)
    throw UsageError("answer_loss: logits rows must match sequence length");
  std::vector<std::size_t> targets(t, 0);
  ops::Mask mask(t, 0);
  for (std::size_t p = 1; p < t; ++p) {
    if (!seq.loss_mask[p]) continue;
    targets[p - 1] = seq.ids[p];
    mask[p - 1] = 1;
  }
  return ops::cross_entropy(logits, targets, mask);
}

}  // namespace slidelm
