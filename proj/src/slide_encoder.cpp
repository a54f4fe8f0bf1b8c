#include "slidelm/encoder/slide_encoder.hpp"

#include <cmath>

#include "slidelm/error.hpp"
#include "slidelm/numerics/ops.hpp"

namespace slidelm {
namespace {

Parameter add_weight(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  return store.add(name, init_uniform_fan_in(rng, in, out));
}

Parameter add_vector(ParameterStore& store, const std::string& name, std::size_t n, double fill) {
  return store.add(name, Tensor({n}, fill));
}

}  // namespace

void SlideEncoderConfig::validate(const std::string& prefix) const {
  if (input_dim == 0) throw ConfigError(prefix + ".input_dim", "must be positive");
  if (dim == 0) throw ConfigError(prefix + ".dim", "must be positive");
  if (heads == 0) throw ConfigError(prefix + ".heads", "must be positive");
  if (dim % heads != 0) throw ConfigError(prefix + ".heads", "dim must be divisible by heads");
  if (ffn_mult == 0) throw ConfigError(prefix + ".ffn_mult", "must be positive");
  if (layers > 0 && branches.empty()) throw ConfigError(prefix + ".branches", "at least one branch is required");
  for (std::size_t i = 0; i < branches.size(); ++i)
    validate_branch(branches[i], prefix + ".branches[" + std::to_string(i) + "]");
  if (positional == PositionalMode::grid2d && max_grid == 0)
    throw ConfigError(prefix + ".max_grid", "must be positive");
}

SlideEncoder::SlideEncoder(ParameterStore& store, const SlideEncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  in_w_ = add_weight(store, "slide_encoder.input.w", cfg.input_dim, cfg.dim, rng);
  in_b_ = add_vector(store, "slide_encoder.input.b", cfg.dim, 0.0);
  if (cfg.positional == PositionalMode::grid2d) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    Tensor rows = Tensor::matrix(cfg.max_grid, cfg.dim), cols = Tensor::matrix(cfg.max_grid, cfg.dim);
    for (double& v : rows.values()) v = rng.uniform(-bound, bound);
    for (double& v : cols.values()) v = rng.uniform(-bound, bound);
    row_emb_ = store.add("slide_encoder.pos.row", std::move(rows));
    col_emb_ = store.add("slide_encoder.pos.col", std::move(cols));
  }
  const std::size_t hidden = cfg.dim * cfg.ffn_mult;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "slide_encoder.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.wq = add_weight(store, p + "attn.wq", cfg.dim, cfg.dim, rng);
    layer.wk = add_weight(store, p + "attn.wk", cfg.dim, cfg.dim, rng);
    layer.wv = add_weight(store, p + "attn.wv", cfg.dim, cfg.dim, rng);
    layer.wo = add_weight(store, p + "attn.wo", cfg.dim, cfg.dim, rng);
    layer.bo = add_vector(store, p + "attn.bo", cfg.dim, 0.0);
    layer.ln1_gain = add_vector(store, p + "ln1.gain", cfg.dim, 1.0);
    layer.ln1_bias = add_vector(store, p + "ln1.bias", cfg.dim, 0.0);
    layer.w1 = add_weight(store, p + "ffn.w1", cfg.dim, hidden, rng);
    layer.b1 = add_vector(store, p + "ffn.b1", hidden, 0.0);
    layer.w2 = add_weight(store, p + "ffn.w2", hidden, cfg.dim, rng);
    layer.b2 = add_vector(store, p + "ffn.b2", cfg.dim, 0.0);
    layer.ln2_gain = add_vector(store, p + "ln2.gain", cfg.dim, 1.0);
    layer.ln2_bias = add_vector(store, p + "ln2.bias", cfg.dim, 0.0);
    layers_.push_back(std::move(layer));
  }
}

Var SlideEncoder::attention(const Layer& layer, const Var& x, std::vector<Tensor>* mix) const {
  using namespace ops;
  const std::size_t n = x.value().rows(), dh = cfg_.head_dim(), nb = cfg_.branches.size();
  const Var q = matmul(x, layer.wq.var());
  const Var k = matmul(x, layer.wk.var());
  const Var v = matmul(x, layer.wv.var());
  std::vector<Var> heads;
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const Var qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Var kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Var vh = slice_cols(v, h * dh, (h + 1) * dh);
    std::vector<Var> outs, lses;
    Mask mask(n * nb, 0);
    for (std::size_t b = 0; b < nb; ++b) {
      const Var full = dilated_attention_with_lse(qh, kh, vh, cfg_.branches[b], h);
      outs.push_back(slice_cols(full, 0, dh));
      lses.push_back(slice_cols(full, dh, dh + 1));
      const DilatedLayout layout = dilated_layout(n, cfg_.branches[b], h);
      for (std::size_t i = 0; i < n; ++i) mask[i * nb + b] = layout.selected[i];
    }
    const Var weights = softmax_rows(concat_cols(lses), mask);
    if (mix) mix->push_back(weights.value());
    Var head = mul_col(outs[0], slice_cols(weights, 0, 1));
    for (std::size_t b = 1; b < nb; ++b) head = add(head, mul_col(outs[b], slice_cols(weights, b, b + 1)));
    heads.push_back(head);
  }
  return add_bias(matmul(concat_cols(heads), layer.wo.var()), layer.bo.var());
}

Var SlideEncoder::forward(const Var& embeddings, std::span<const PatchEntry> tiles, SlideEncoderTrace* trace) const {
  using namespace ops;
  if (!embeddings) throw UsageError("slide encoder: empty sequence");
  const Tensor& e = embeddings.value();
  if (e.rank() != 2 || e.rows() == 0) throw UsageError("slide encoder: expected a non-empty N×D embedding matrix");
  if (e.cols() != cfg_.input_dim)
    throw ConfigError("encoder.input_dim", "embedding dim " + std::to_string(e.cols()) + " != configured " +
                                               std::to_string(cfg_.input_dim));
  Var x = add_bias(matmul(embeddings, in_w_.var()), in_b_.var());
  if (cfg_.positional == PositionalMode::grid2d) {
    if (tiles.size() != e.rows())
      throw UsageError("slide encoder: " + std::to_string(tiles.size()) + " tile positions for " +
                       std::to_string(e.rows()) + " embeddings");
    std::vector<std::size_t> rows, cols;
    for (const auto& t : tiles) {
      if (t.row >= cfg_.max_grid || t.col >= cfg_.max_grid)
        throw UsageError("tile (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                         ") exceeds positional grid " + std::to_string(cfg_.max_grid));
      rows.push_back(t.row);
      cols.push_back(t.col);
    }
    x = add(x, add(gather_rows(row_emb_.var(), rows), gather_rows(col_emb_.var(), cols)));
  }
  if (trace) trace->mix.assign(layers_.size(), {});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    x = layer_norm(add(x, attention(layer, x, trace ? &trace->mix[l] : nullptr)), layer.ln1_gain.var(),
                   layer.ln1_bias.var());
    const Var ffn = add_bias(matmul(gelu(add_bias(matmul(x, layer.w1.var()), layer.b1.var())), layer.w2.var()),
                             layer.b2.var());
    x = layer_norm(add(x, ffn), layer.ln2_gain.var(), layer.ln2_bias.var());
  }
  return x;
}

void ProjectorConfig::validate(const std::string& prefix) const {
  if (input_dim == 0) throw ConfigError(prefix + ".input_dim", "must be positive");
  if (output_dim == 0) throw ConfigError(prefix + ".output_dim", "must be positive");
  if (layers != 1 && layers != 2) throw ConfigError(prefix + ".layers", "must be 1 or 2");
}

Projector::Projector(ParameterStore& store, const ProjectorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.hidden == 0) cfg_.hidden = cfg_.output_dim;
  if (cfg_.layers == 1) {
    w_.push_back(add_weight(store, "projector.w0", cfg_.input_dim, cfg_.output_dim, rng));
    b_.push_back(add_vector(store, "projector.b0", cfg_.output_dim, 0.0));
  } else {
    w_.push_back(add_weight(store, "projector.w0", cfg_.input_dim, cfg_.hidden, rng));
    b_.push_back(add_vector(store, "projector.b0", cfg_.hidden, 0.0));
    w_.push_back(add_weight(store, "projector.w1", cfg_.hidden, cfg_.output_dim, rng));
    b_.push_back(add_vector(store, "projector.b1", cfg_.output_dim, 0.0));
  }
}

Var Projector::forward(const Var& features) const {
  using namespace ops;
  if (features.value().rank() != 2 || features.value().cols() != cfg_.input_dim)
    throw ConfigError("projector.input_dim", "feature shape " + shape_string(features.shape()) +
                                                 " does not match input_dim " + std::to_string(cfg_.input_dim));
  Var x = add_bias(matmul(features, w_[0].var()), b_[0].var());
  if (cfg_.layers == 2) x = add_bias(matmul(gelu(x), w_[1].var()), b_[1].var());
  return x;
}

}  // namespace slidelm
