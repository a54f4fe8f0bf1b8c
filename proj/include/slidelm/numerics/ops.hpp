#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slidelm/numerics/autograd.hpp"

namespace slidelm::ops {

/// Row-major boolean mask; 1 = position allowed.
using Mask = std::vector<std::uint8_t>;

Var constant(Tensor t);

Var matmul(const Var& a, const Var& b);     // [m×k]·[k×n]
Var matmul_nt(const Var& a, const Var& b);  // [m×k]·[n×k]ᵀ
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_bias(const Var& x, const Var& bias);  // bias has x.cols() elements
Var mul_col(const Var& x, const Var& col);    // col is [rows×1]

Var gelu(const Var& x);
Var tanh(const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// Row softmax restricted to allowed entries; masked entries and fully masked
/// rows produce exact zeros.
Var softmax_rows(const Var& x, const Mask& mask = {});

Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);

Var sum(const Var& x);
Var sum_squares(const Var& x);

/// Mean of -log softmax(logits[t])[targets[t]] over rows with mask[t] != 0.
/// Throws UsageError when no row is masked in or a target is out of range.
Var cross_entropy(const Var& logits, std::span<const std::size_t> targets, const Mask& mask);

}  // namespace slidelm::ops
