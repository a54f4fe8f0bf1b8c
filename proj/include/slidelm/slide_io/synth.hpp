#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slidelm/slide_io/raster.hpp"

namespace slidelm {

enum class TissueKind { background, tumor, stroma, necrosis, lymphocytes };

std::string_view to_string(TissueKind k);
std::optional<TissueKind> parse_tissue_kind(std::string_view s);

/// A tile-aligned rectangle painted with one texture.
struct SynthRegion {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  TissueKind kind = TissueKind::tumor;
};

struct SynthSpec {
  std::size_t width = 448;
  std::size_t height = 448;
  std::size_t patch_size = 224;
  std::vector<SynthRegion> regions;
};

struct SynthSlide {
  Raster raster;
  /// One label per full tile, row-major over floor(W/p) × floor(H/p).
  std::vector<TissueKind> tile_labels;
};

/// Paints regions on a near-white background. Deterministic per seed; noise
/// varies with the seed, labels do not. Throws UsageError on overlapping,
/// misaligned or out-of-canvas regions.
SynthSlide synth_slide(std::uint64_t seed, const SynthSpec& spec);

/// Parses "WxH[@P]:kind@x,y,w,h;kind@x,y,w,h" (P = patch size, default 224).
SynthSpec parse_synth_layout(std::string_view layout);

}  // namespace slidelm
