#pragma once

#include <cstdint>
#include <vector>

#include "slidelm/encoder/embeddings.hpp"
#include "slidelm/numerics/parameters.hpp"
#include "slidelm/slide_io/raster.hpp"
#include "slidelm/slide_io/tiling.hpp"

namespace slidelm {

struct PatchEncoderConfig {
  std::size_t dim = 64;
  std::size_t patch_size = 224;
  std::uint64_t seed = 1234;  // fixes the random projection; independent of the run seed
};

/// Frozen stand-in for a pretrained patch foundation model: pooled colour,
/// stain and texture statistics pushed through a fixed random projection and
/// tanh. Its parameters live in the "patch_encoder" group and are never
/// trainable.
class PatchEncoder {
 public:
  static constexpr std::size_t kStatCount = 12;

  PatchEncoder(ParameterStore& store, const PatchEncoderConfig& cfg);

  /// Throws UsageError unless the patch is patch_size × patch_size.
  std::vector<double> encode(const Raster& patch) const;

  /// Encodes every tissue tile of `grid`, in grid order. Throws UsageError
  /// when the grid has no tissue tiles.
  EmbeddingMatrix encode_slide(const Raster& slide, const PatchGrid& grid) const;

  static std::vector<double> pooled_statistics(const Raster& patch);

  const PatchEncoderConfig& config() const noexcept { return cfg_; }

 private:
  PatchEncoderConfig cfg_;
  Parameter weight_;  // [kStatCount × dim]
  Parameter bias_;    // [dim]
};

}  // namespace slidelm
