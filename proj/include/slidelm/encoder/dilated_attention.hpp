#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "slidelm/numerics/autograd.hpp"

namespace slidelm {

/// One sparse-attention branch: segments of `segment` rows, of which every
/// `dilation`-th row (starting at the head's offset) takes part.
struct DilationBranch {
  std::size_t segment = 16;
  std::size_t dilation = 1;

  friend bool operator==(const DilationBranch&, const DilationBranch&) = default;
};

/// Throws ConfigError unless segment >= dilation >= 1 and segment % dilation == 0.
void validate_branch(const DilationBranch& b, const std::string& key_path = "branch");

/// Row selection of one (branch, head) pair over a length-n sequence.
struct DilatedLayout {
  std::size_t n = 0;
  std::size_t segment = 0;  // effective segment length (capped at the padded sequence length)
  std::size_t dilation = 1;
  std::size_t offset = 0;   // head index mod dilation
  std::size_t slots = 0;    // segment / dilation: padded rows per segment
  /// Real (unpadded) positions per segment, ascending.
  std::vector<std::vector<std::size_t>> segments;
  std::vector<std::uint8_t> selected;  // per position
};

DilatedLayout dilated_layout(std::size_t n, const DilationBranch& b, std::size_t head);

/// Single-head dilated attention over projected q, k, v [N×d]. Returns
/// [N×(d+1)]: columns 0..d-1 hold the attention output, column d the
/// log-sum-exp of the row's scaled scores (the log softmax denominator).
/// Rows the branch does not select are exactly zero.
Var dilated_attention_with_lse(const Var& q, const Var& k, const Var& v, const DilationBranch& b, std::size_t head);

/// Output columns only, [N×d].
Var dilated_attention(const Var& q, const Var& k, const Var& v, const DilationBranch& b, std::size_t head);

/// Inspection of the same computation without autograd. `segment_weights[s]`
/// is slots×slots in padded layout: padded rows and columns are zero.
struct DilatedAttentionProbe {
  DilatedLayout layout;
  Tensor output;
  std::vector<double> lse;
  std::vector<Tensor> segment_weights;
};

DilatedAttentionProbe probe_dilated_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const DilationBranch& b, std::size_t head);

}  // namespace slidelm
