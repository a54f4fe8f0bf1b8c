#pragma once

#include <span>
#include <string>
#include <vector>

#include "slidelm/encoder/dilated_attention.hpp"
#include "slidelm/numerics/parameters.hpp"
#include "slidelm/slide_io/tiling.hpp"

namespace slidelm {

enum class PositionalMode { none, grid2d };

struct SlideEncoderConfig {
  std::size_t input_dim = 64;
  std::size_t dim = 128;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_mult = 4;
  std::vector<DilationBranch> branches{{16, 1}, {32, 2}, {64, 4}};
  PositionalMode positional = PositionalMode::none;
  std::size_t max_grid = 64;  // grid2d: max tile row/col index + 1

  std::size_t head_dim() const { return heads ? dim / heads : 0; }
  /// Throws ConfigError naming the offending key under `prefix`.
  void validate(const std::string& prefix = "encoder") const;
};

/// Branch-mixing weights captured during a forward pass: mix[layer][head]
/// is [N × branches].
struct SlideEncoderTrace {
  std::vector<std::vector<Tensor>> mix;
};

/// Input projection followed by post-norm blocks of multi-branch dilated
/// attention and a GELU feed-forward network. Branch outputs are mixed per
/// row with weights proportional to each branch's softmax denominator.
class SlideEncoder {
 public:
  SlideEncoder(ParameterStore& store, const SlideEncoderConfig& cfg, Rng& rng);

  /// `tiles` supplies grid coordinates for positional embeddings and may be
  /// empty when positional == none. Throws UsageError on an empty sequence.
  Var forward(const Var& embeddings, std::span<const PatchEntry> tiles = {},
              SlideEncoderTrace* trace = nullptr) const;

  const SlideEncoderConfig& config() const noexcept { return cfg_; }

  struct Layer {
    Parameter wq, wk, wv, wo, bo;
    Parameter ln1_gain, ln1_bias;
    Parameter w1, b1, w2, b2;
    Parameter ln2_gain, ln2_bias;
  };
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Parameter& input_weight() const noexcept { return in_w_; }
  const Parameter& input_bias() const noexcept { return in_b_; }

 private:
  Var attention(const Layer& layer, const Var& x, std::vector<Tensor>* mix) const;

  SlideEncoderConfig cfg_;
  Parameter in_w_, in_b_;
  Parameter row_emb_, col_emb_;
  std::vector<Layer> layers_;
};

struct ProjectorConfig {
  std::size_t input_dim = 128;
  std::size_t output_dim = 128;
  std::size_t layers = 1;  // 1 = affine, 2 = affine-GELU-affine
  std::size_t hidden = 0;  // 0 → output_dim

  void validate(const std::string& prefix = "projector") const;
};

/// Maps slide-encoder features into the language model's embedding space.
class Projector {
 public:
  Projector(ParameterStore& store, const ProjectorConfig& cfg, Rng& rng);

  /// Throws ConfigError when the feature width differs from input_dim.
  Var forward(const Var& features) const;

  const ProjectorConfig& config() const noexcept { return cfg_; }
  Parameter& weight(std::size_t layer) { return w_.at(layer); }
  Parameter& bias(std::size_t layer) { return b_.at(layer); }

 private:
  ProjectorConfig cfg_;
  std::vector<Parameter> w_, b_;
};

}  // namespace slidelm
