#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "slidelm/error.hpp"
#include "slidelm/lm/decoder.hpp"
#include "slidelm/lm/generate.hpp"
#include "slidelm/model/model.hpp"
#include "slidelm/numerics/adamw.hpp"
#include "slidelm/numerics/ops.hpp"
#include "support/gradcheck.hpp"

namespace slidelm {
namespace {

using testing::grad_check;
using testing::random_tensor;

Vocab tiny_vocab() {
  return Vocab::build({"the slide shows tumor with dense stroma", "describe the slide", "necrosis is absent ."});
}

DecoderConfig tiny_decoder(std::size_t vocab) {
  DecoderConfig c;
  c.vocab_size = vocab;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_text_len = 32;
  return c;
}

// ---- vocab ---------------------------------------------------------------

TEST(Vocab, EmptyTextRoundTrips) {
  const Vocab v = tiny_vocab();
  EXPECT_TRUE(v.tokenize("").empty());
  EXPECT_EQ(v.detokenize({}), "");
}

TEST(Vocab, RandomWordSequencesRoundTrip) {
  const Vocab v = tiny_vocab();
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    const std::size_t n = rng.below(12);
    for (std::size_t k = 0; k < n; ++k) {
      if (k) text += ' ';
      text += v.token(Vocab::kSpecialCount + rng.below(v.size() - Vocab::kSpecialCount));
    }
    EXPECT_EQ(v.detokenize(v.tokenize(text)), text);
  }
}

TEST(Vocab, SpecialsNeverProducedByText) {
  const Vocab v = tiny_vocab();
  const auto ids = v.tokenize("<eos> <bos> <img> </img> <pad> <unk> tumor");
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) EXPECT_EQ(ids[i], Vocab::kUnk);
  EXPECT_FALSE(Vocab::is_special(ids.back()));
}

TEST(Vocab, UnknownWordsMapToUnk) {
  const Vocab v = tiny_vocab();
  EXPECT_EQ(v.tokenize("tumor xyzzy"), (std::vector<std::size_t>{v.tokenize("tumor")[0], Vocab::kUnk}));
  EXPECT_EQ(v.detokenize(v.tokenize("xyzzy slide")), "<unk> slide");
}

TEST(Vocab, BuildOrdersByFrequencyThenAlphabet) {
  const Vocab v = Vocab::build({"b a c a", "c a"});
  EXPECT_EQ(v.token(6), "a");
  EXPECT_EQ(v.token(7), "c");
  EXPECT_EQ(v.token(8), "b");
}

TEST(Vocab, FileRoundTripAndValidation) {
  const auto dir = std::filesystem::temp_directory_path() / "slidelm_vocab_test";
  std::filesystem::create_directories(dir);
  const Vocab v = tiny_vocab();
  v.save((dir / "v.txt").string());
  const Vocab back = Vocab::load((dir / "v.txt").string());
  EXPECT_EQ(back.tokens(), v.tokens());
  std::ofstream((dir / "bad.txt").string()) << "hello\nworld\n";
  EXPECT_THROW(Vocab::load((dir / "bad.txt").string()), LoadError);
  std::ofstream((dir / "dup.txt").string()) << "<pad>\n<unk>\n<bos>\n<eos>\n<img>\n</img>\nx\nx\n";
  EXPECT_THROW(Vocab::load((dir / "dup.txt").string()), LoadError);
  std::filesystem::remove_all(dir);
}

// ---- assembly ------------------------------------------------------------

TEST(Assemble, LayoutArithmetic) {
  const Var vis = ops::constant(Tensor::matrix(2, 8, 0.1));
  const std::vector<std::size_t> prompt{7, 8, 9}, answer{10, 11};
  const auto s = assemble(vis, prompt, std::span<const std::size_t>(answer), 8);
  ASSERT_EQ(s.length(), 2u + 2u + 1u + 3u + 3u);
  EXPECT_EQ(s.ids[0], Vocab::kImgStart);
  EXPECT_EQ(s.ids[3], Vocab::kImgEnd);
  EXPECT_EQ(s.ids[4], Vocab::kBos);
  EXPECT_EQ(s.ids.back(), Vocab::kEos);
  for (std::size_t p = 0; p < s.length(); ++p) EXPECT_EQ(s.loss_mask[p], p >= 8 ? 1 : 0) << p;
  EXPECT_TRUE(s.is_visual(1) && s.is_visual(2) && !s.is_visual(3));
}

TEST(Assemble, InferenceHasNoMask) {
  const Var vis = ops::constant(Tensor::matrix(3, 8, 0.1));
  const std::vector<std::size_t> prompt{7};
  const auto s = assemble(vis, prompt, std::nullopt);
  EXPECT_EQ(s.length(), 1u + 3u + 2u + 1u);
  for (auto m : s.loss_mask) EXPECT_EQ(m, 0);
}

TEST(Assemble, SamePromptDifferentSlides) {
  const std::vector<std::size_t> prompt{7, 8};
  const auto a = assemble(ops::constant(Tensor::matrix(2, 4, 0.1)), prompt, std::nullopt);
  const auto b = assemble(ops::constant(Tensor::matrix(2, 4, 0.9)), prompt, std::nullopt);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_NE(a.visual.value(), b.visual.value());
}

TEST(Assemble, Errors) {
  const Var vis = ops::constant(Tensor::matrix(2, 8, 0.1));
  EXPECT_THROW(assemble(vis, {}, std::nullopt), UsageError);
  const std::vector<std::size_t> prompt{7};
  EXPECT_THROW(assemble(vis, prompt, std::nullopt, 16), UsageError);
}

// ---- decoder -------------------------------------------------------------

struct DecoderFixture : ::testing::Test {
  Vocab vocab = tiny_vocab();
  ParameterStore store;
  Rng rng{5};
  Decoder dec{store, tiny_decoder(vocab.size()), rng};
  Tensor visual = random_tensor(rng, {3, 8});
  std::vector<std::size_t> prompt = vocab.tokenize("describe the slide");
  std::vector<std::size_t> answer = vocab.tokenize("tumor with dense stroma");

  MultimodalSequence seq(const Tensor& vis) const {
    return assemble(ops::constant(vis), prompt, std::span<const std::size_t>(answer), 8);
  }
};

TEST_F(DecoderFixture, FutureTokensDoNotAffectPastLogits) {
  const auto base = seq(visual);
  const Tensor a = dec.forward(base).value();
  for (std::size_t t = base.prompt_begin; t + 1 < base.length(); ++t) {
    auto s = base;
    for (std::size_t p = t + 1; p < s.length(); ++p) s.ids[p] = Vocab::kSpecialCount + (s.ids[p] + 3) % 5;
    const Tensor b = dec.forward(s).value();
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) ASSERT_EQ(a(r, c), b(r, c)) << "t=" << t << " r=" << r;
  }
}

TEST_F(DecoderFixture, VisualPerturbationChangesFirstAnswerLogits) {
  const auto base = seq(visual);
  Tensor other = visual;
  other(2, 5) += 0.5;
  const Tensor a = dec.forward(base).value(), b = dec.forward(seq(other)).value();
  const std::size_t row = base.answer_begin - 1;
  double diff = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) diff = std::max(diff, std::abs(a(row, c) - b(row, c)));
  EXPECT_GT(diff, 1e-6);
}

TEST_F(DecoderFixture, VisualSpanIsBidirectionalUnlessFullyCausal) {
  const auto m = dec.attention_mask(seq(visual));
  const std::size_t t = seq(visual).length();
  EXPECT_EQ(m[1 * t + 3], 1);  // first visual sees last visual
  EXPECT_EQ(m[0 * t + 2], 1);  // IMG_START sees visual
  EXPECT_EQ(m[5 * t + 6], 0);  // text stays causal
  auto cfg = tiny_decoder(vocab.size());
  cfg.prefix_bidirectional = false;
  ParameterStore s2;
  Rng r2(1);
  Decoder causal(s2, cfg, r2);
  const auto mc = causal.attention_mask(seq(visual));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) EXPECT_EQ(mc[i * t + j], j <= i ? 1 : 0);
}

TEST_F(DecoderFixture, LogitsAreFiniteAndAttentionRowsNormalised) {
  AttentionCapture cap;
  const Tensor logits = dec.forward(seq(visual), &cap).value();
  EXPECT_TRUE(logits.all_finite());
  ASSERT_EQ(cap.attention.size(), 2u);
  for (const auto& layer : cap.attention)
    for (const Tensor& a : layer)
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0;
        for (double v : a.row(i)) s += v;
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
}

TEST_F(DecoderFixture, LossIgnoresUnmaskedRows) {
  const auto s = seq(visual);
  const Var logits = dec.forward(s);
  const double loss = answer_loss(logits, s).value().item();
  Tensor zeroed = logits.value();
  for (std::size_t r = 0; r + 1 < s.length(); ++r)
    if (!s.loss_mask[r + 1])
      for (std::size_t c = 0; c < zeroed.cols(); ++c) zeroed(r, c) = 0.0;
  EXPECT_EQ(answer_loss(ops::constant(zeroed), s).value().item(), loss);
  // Direct oracle: mean over answer+EOS targets of -log softmax.
  double expect = 0;
  std::size_t n = 0;
  for (std::size_t p = 1; p < s.length(); ++p) {
    if (!s.loss_mask[p]) continue;
    const auto row = logits.value().row(p - 1);
    double mx = *std::max_element(row.begin(), row.end()), z = 0;
    for (double v : row) z += std::exp(v - mx);
    expect += -(row[s.ids[p]] - mx - std::log(z));
    ++n;
  }
  EXPECT_NEAR(loss, expect / n, 1e-12);
}

TEST_F(DecoderFixture, EndToEndGradientCheck) {
  Parameter vis("test.visual", visual);
  auto loss = [&] {
    const auto s = assemble(vis.var(), prompt, std::span<const std::size_t>(answer), 8);
    return answer_loss(dec.forward(s), s);
  };
  auto params = store.all();
  params.push_back(vis);
  const auto rep = grad_check(params, loss, rng, 1e-5, 16);
  EXPECT_LT(rep.worst_rel_error, 1e-4) << rep.worst_param;
}

TEST(Decoder, TiedHeadGradientCheck) {
  const Vocab vocab = tiny_vocab();
  auto cfg = tiny_decoder(vocab.size());
  cfg.tied_head = true;
  cfg.layers = 1;
  ParameterStore store;
  Rng rng(8);
  Decoder dec(store, cfg, rng);
  EXPECT_EQ(store.find("lm.head.w"), nullptr);
  const Tensor vis = random_tensor(rng, {2, 8});
  const std::vector<std::size_t> prompt{6, 7}, answer{8};
  auto loss = [&] {
    const auto s = assemble(ops::constant(vis), prompt, std::span<const std::size_t>(answer), 8);
    return answer_loss(dec.forward(s), s);
  };
  EXPECT_LT(grad_check(store.all(), loss, rng, 1e-5, 16).worst_rel_error, 1e-4);
}

TEST(Decoder, TextSpanLimit) {
  const Vocab vocab = tiny_vocab();
  auto cfg = tiny_decoder(vocab.size());
  cfg.max_text_len = 5;
  ParameterStore store;
  Rng rng(1);
  Decoder dec(store, cfg, rng);
  const std::vector<std::size_t> prompt{6, 7, 8};
  EXPECT_THROW(dec.forward(assemble(ops::constant(Tensor::matrix(1, 8)), prompt, std::nullopt)), UsageError);
}

// ---- generation ----------------------------------------------------------

TEST_F(DecoderFixture, GreedyIsDeterministicAndTraceShaped) {
  const GenerationConfig gc{.max_len = 5};
  const auto a = generate(dec, ops::constant(visual), prompt, gc);
  const auto b = generate(dec, ops::constant(visual), prompt, gc);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.trace.weights, b.trace.weights);
  EXPECT_EQ(a.trace.steps(), a.ids.size() + (a.hit_eos ? 1 : 0));
  EXPECT_EQ(a.trace.weights.size(), a.trace.steps() * 2 * 2 * 3);
  for (std::size_t id : a.ids) EXPECT_GE(id, Vocab::kSpecialCount);
}

TEST_F(DecoderFixture, MaxLenOneEmitsOneToken) {
  const auto r = generate(dec, ops::constant(visual), prompt, {.max_len = 1});
  EXPECT_EQ(r.trace.steps(), 1u);
  EXPECT_THROW(generate(dec, ops::constant(visual), prompt, {.max_len = 0}), UsageError);
}

TEST_F(DecoderFixture, TraceMatchesCapturedAttention) {
  const auto r = generate(dec, ops::constant(visual), prompt, {.max_len = 1});
  auto s = assemble(ops::constant(visual), prompt, std::nullopt);
  AttentionCapture cap;
  dec.forward(s, &cap);
  const std::size_t last = s.length() - 1;
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(r.trace.at(0, l, h, n), cap.attention[l][h](last, 1 + n));
}

TEST_F(DecoderFixture, OverfitSingleCaptionIsReproduced) {
  AdamW opt({.lr = 1e-2, .weight_decay = 0.0});
  const auto s = seq(visual);
  for (int step = 0; step < 300; ++step) {
    store.zero_grad();
    backward(answer_loss(dec.forward(s), s));
    opt.step(store.all());
  }
  const auto r = generate(dec, ops::constant(visual), prompt, {.max_len = 10});
  EXPECT_EQ(vocab.detokenize(r.ids), "tumor with dense stroma");
  EXPECT_TRUE(r.hit_eos);
}

// ---- composed model ------------------------------------------------------

ModelConfig tiny_model() {
  ModelConfig c;
  c.patch.dim = 6;
  c.patch.patch_size = 16;
  c.encoder.dim = 8;
  c.encoder.heads = 2;
  c.encoder.layers = 1;
  c.encoder.ffn_mult = 2;
  c.encoder.branches = {{4, 1}, {8, 2}};
  c.lm = tiny_decoder(0);
  return c;
}

TEST(Model, ConfigJsonRoundTripAndStrictKeys) {
  const ModelConfig c = tiny_model();
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  auto j = c.to_json();
  j["encoder"]["bogus"] = 1;
  try {
    ModelConfig::from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key_path(), "model.encoder.bogus");
  }
  j = c.to_json();
  j["encoder"]["branches"][1]["segment"] = 6;
  j["encoder"]["branches"][1]["dilation"] = 4;
  ModelConfig bad = ModelConfig::from_json(j);
  EXPECT_THROW(bad.finalize(10), ConfigError);
}

TEST(Model, BypassDropsSlideEncoderParameters) {
  ModelConfig c = tiny_model();
  c.bypass_slide_encoder = true;
  SlideLanguageModel m(c, tiny_vocab(), 1);
  EXPECT_TRUE(m.params().group("slide_encoder").empty());
  for (const auto& [name, t] : m.checkpoint().tensors) EXPECT_NE(name.rfind("slide_encoder.", 0), 0u) << name;
  EXPECT_EQ(m.projector().config().input_dim, 6u);
}

TEST(Model, BypassWithIdentityProjectorPassesEmbeddingsThrough) {
  ModelConfig c = tiny_model();
  c.bypass_slide_encoder = true;
  c.patch.dim = 8;
  SlideLanguageModel m(c, tiny_vocab(), 1);
  auto& w = m.projector().weight(0).value();
  w.fill(0.0);
  for (std::size_t i = 0; i < 8; ++i) w(i, i) = 1.0;
  Rng rng(2);
  const EmbeddingMatrix e{random_tensor(rng, {4, 8})};
  EXPECT_EQ(m.visual_tokens(e).value(), e.values);
}

TEST(Model, BypassToggleChangesForward) {
  ModelConfig c = tiny_model();
  SlideLanguageModel with(c, tiny_vocab(), 1);
  c.bypass_slide_encoder = true;
  SlideLanguageModel without(c, tiny_vocab(), 1);
  Rng rng(4);
  const EmbeddingMatrix e{random_tensor(rng, {5, 6})};
  const double a = with.loss(e, {}, "describe the slide", "tumor").value().item();
  const double b = without.loss(e, {}, "describe the slide", "tumor").value().item();
  EXPECT_NE(a, b);
}

TEST(Model, CheckpointRebuildsIdenticalModel) {
  SlideLanguageModel m(tiny_model(), tiny_vocab(), 9);
  Rng rng(4);
  const EmbeddingMatrix e{random_tensor(rng, {5, 6})};
  const auto back = SlideLanguageModel::from_checkpoint(m.checkpoint());
  EXPECT_EQ(back.vocab().tokens(), m.vocab().tokens());
  EXPECT_EQ(back.loss(e, {}, "describe the slide", "tumor stroma").value().item(),
            m.loss(e, {}, "describe the slide", "tumor stroma").value().item());
  EXPECT_EQ(back.params().checksum("lm"), m.params().checksum("lm"));
}

TEST(Model, EmbeddingWidthMismatchIsConfigError) {
  SlideLanguageModel m(tiny_model(), tiny_vocab(), 9);
  EXPECT_THROW(m.visual_tokens({Tensor::matrix(3, 7)}), ConfigError);
}

}  // namespace
}  // namespace slidelm
