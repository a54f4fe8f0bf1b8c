#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "slidelm/interpret/attention_trace.hpp"
#include "slidelm/slide_io/raster.hpp"
#include "slidelm/slide_io/tiling.hpp"

namespace slidelm {

struct SaliencyOptions {
  std::size_t k = 5;
  /// Rescale each (token, layer, head) row to sum to 1 over the visual span
  /// before averaging; rows with zero visual mass stay zero.
  bool renormalize = true;
  /// Restrict to these generation steps; empty = every step.
  std::vector<std::size_t> steps;
};

struct PatchSaliency {
  struct Entry {
    std::size_t patch_index = 0;
    double score = 0.0;
  };
  std::vector<Entry> ranked;       // top-k, scores non-increasing, ties by lower index
  std::vector<double> scores;      // every patch, indexed by patch
  std::vector<std::size_t> steps;  // generation steps that were averaged
  std::string warning;             // set when k was clamped
};

/// Mean attention per patch over the selected steps, all layers and heads.
/// Throws UsageError on an empty trace or a step index out of range.
PatchSaliency saliency(const AttentionTrace& trace, const SaliencyOptions& opts = {});

/// Copy of `thumbnail` with each ranked patch tinted 30% and outlined with a
/// 3-pixel border in its rank colour, plus the rank digit in the corner.
/// Patch indices address the grid's tissue tiles in order; the thumbnail must
/// be the square letterboxed thumbnail of the grid's source slide. Throws
/// UsageError on an index outside the grid.
Raster render_overlay(const Raster& thumbnail, const PatchGrid& grid, const PatchSaliency& sal);

/// CSV `rank,patch_index,row,col,score` (rank is 1-based).
void write_saliency_csv(const std::string& path, const PatchGrid& grid, const PatchSaliency& sal);

}  // namespace slidelm
