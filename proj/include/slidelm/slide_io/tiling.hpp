#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slidelm/slide_io/raster.hpp"

namespace slidelm {

struct TissueFilterConfig {
  double saturation_threshold = 0.08;  // HSV saturation above which a pixel counts as stained
  double tissue_fraction = 0.25;       // minimum stained-pixel fraction for a tissue tile
};

struct PatchEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t x = 0;
  std::size_t y = 0;
  bool tissue = false;

  friend bool operator==(const PatchEntry&, const PatchEntry&) = default;
};

/// Candidate tiles of one slide, sorted row-major.
struct PatchGrid {
  std::size_t patch_size = 224;
  std::size_t source_width = 0;
  std::size_t source_height = 0;
  std::vector<PatchEntry> entries;

  std::size_t rows() const { return patch_size ? source_height / patch_size : 0; }
  std::size_t cols() const { return patch_size ? source_width / patch_size : 0; }
  std::size_t tissue_count() const;
  /// Entries flagged as tissue, in grid order; this is the embedding row order.
  std::vector<PatchEntry> tissue_entries() const;

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

/// Fraction of pixels whose stain intensity exceeds the saturation threshold.
/// RGB uses HSV saturation; gray uses darkness (1 - v/255) as the proxy.
double stained_fraction(const Raster& patch, double saturation_threshold);

/// True iff the stained fraction reaches `cfg.tissue_fraction`.
bool tissue_filter(const Raster& patch, const TissueFilterConfig& cfg = {});

/// Non-overlapping patch_size tiles; partial edge tiles are dropped. A raster
/// smaller than one patch yields an empty grid. `jobs` > 1 filters tiles on
/// worker threads; the output order does not depend on it.
PatchGrid tile_slide(const Raster& r, std::size_t patch_size = 224, const TissueFilterConfig& cfg = {},
                     unsigned jobs = 1);

Raster extract_patch(const Raster& r, const PatchGrid& grid, const PatchEntry& e);

/// Text table: '#' header with patch_size/width/height, then `row col x y tissue`.
void write_patch_grid(const std::string& path, const PatchGrid& grid);
PatchGrid read_patch_grid(const std::string& path);

}  // namespace slidelm
