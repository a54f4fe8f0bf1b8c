#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "slidelm/numerics/tensor.hpp"

namespace slidelm {

/// N×D patch features, rows aligned with the tissue tiles of a PatchGrid.
struct EmbeddingMatrix {
  Tensor values;

  std::size_t n_patches() const { return values.empty() ? 0 : values.rows(); }
  std::size_t dim() const { return values.empty() ? 0 : values.cols(); }
};

/// File layout: "SEMB" magic, u32 N, u32 D (little-endian), then N·D
/// little-endian IEEE-754 32-bit floats, row-major.
void save_embeddings(const std::string& path, const EmbeddingMatrix& e);

/// Throws LoadError on a bad header, truncated data, non-finite values, or a
/// mismatch with `expected_dim` / `expected_rows` when given.
EmbeddingMatrix load_embeddings(const std::string& path, std::optional<std::size_t> expected_dim = std::nullopt,
                                std::optional<std::size_t> expected_rows = std::nullopt);

}  // namespace slidelm
