#include "slidelm/slide_io/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slidelm/error.hpp"
#include "slidelm/rng.hpp"

namespace slidelm {
namespace {

struct Rgb {
  double r, g, b;
};

struct Texture {
  Rgb base;
  Rgb blob;
  double blob_density;  // probability that a lattice cell holds a nucleus
  double blob_radius;   // pixels
  double stripe_amp;    // fibrous stripe modulation of the base colour
  double noise;         // per-channel uniform noise amplitude
};

Texture texture_for(TissueKind k) {
  switch (k) {
    case TissueKind::tumor:
      return {{150, 80, 170}, {70, 30, 115}, 0.85, 4.5, 0.0, 10};
    case TissueKind::stroma:
      return {{236, 158, 198}, {200, 110, 170}, 0.08, 2.0, 22.0, 8};
    case TissueKind::necrosis:
      return {{214, 176, 190}, {170, 140, 160}, 0.35, 1.5, 0.0, 14};
    case TissueKind::lymphocytes:
      return {{228, 170, 208}, {50, 30, 120}, 0.55, 2.2, 0.0, 8};
    case TissueKind::background:
      break;
  }
  return {{243, 243, 243}, {243, 243, 243}, 0.0, 0.0, 0.0, 4};
}

constexpr std::size_t kCell = 8;

}  // namespace

std::string_view to_string(TissueKind k) {
  switch (k) {
    case TissueKind::background: return "background";
    case TissueKind::tumor: return "tumor";
    case TissueKind::stroma: return "stroma";
    case TissueKind::necrosis: return "necrosis";
    case TissueKind::lymphocytes: return "lymphocytes";
  }
  return "background";
}

std::optional<TissueKind> parse_tissue_kind(std::string_view s) {
  for (auto k : {TissueKind::background, TissueKind::tumor, TissueKind::stroma, TissueKind::necrosis,
                 TissueKind::lymphocytes})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

SynthSlide synth_slide(std::uint64_t seed, const SynthSpec& spec) {
  const std::size_t p = spec.patch_size;
  if (p == 0 || spec.width == 0 || spec.height == 0) throw UsageError("synth_slide: sizes must be positive");
  const std::size_t cols = spec.width / p, rows = spec.height / p;

  std::vector<int> owner(rows * cols, -1);
  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    const auto& reg = spec.regions[i];
    if (reg.width == 0 || reg.height == 0 || reg.x % p || reg.y % p || reg.width % p || reg.height % p)
      throw UsageError("synth_slide: region " + std::to_string(i) + " is not tile-aligned");
    if (reg.x + reg.width > cols * p || reg.y + reg.height > rows * p)
      throw UsageError("synth_slide: region " + std::to_string(i) + " exceeds the tiled canvas");
    for (std::size_t ty = reg.y / p; ty < (reg.y + reg.height) / p; ++ty)
      for (std::size_t tx = reg.x / p; tx < (reg.x + reg.width) / p; ++tx) {
        int& o = owner[ty * cols + tx];
        if (o >= 0)
          throw UsageError("synth_slide: regions " + std::to_string(o) + " and " + std::to_string(i) + " overlap");
        o = static_cast<int>(i);
      }
  }

  SynthSlide out;
  out.raster = Raster(spec.width, spec.height, 3);
  out.tile_labels.resize(rows * cols, TissueKind::background);
  for (std::size_t t = 0; t < owner.size(); ++t)
    if (owner[t] >= 0) out.tile_labels[t] = spec.regions[static_cast<std::size_t>(owner[t])].kind;

  const Rng root(seed);
  Rng noise = root.split("pixel-noise");
  const Rng lattice = root.split("nuclei");
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      TissueKind kind = TissueKind::background;
      if (x < cols * p && y < rows * p) kind = out.tile_labels[(y / p) * cols + x / p];
      const Texture tex = texture_for(kind);
      Rgb c = tex.base;
      if (tex.stripe_amp > 0.0) {
        const double s = tex.stripe_amp * std::sin(0.45 * static_cast<double>(y) + 0.08 * static_cast<double>(x));
        c = {c.r + s, c.g + s, c.b + 0.5 * s};
      }
      if (tex.blob_density > 0.0) {
        // Each lattice cell may hold one nucleus at a jittered centre.
        const std::size_t cx = x / kCell, cy = y / kCell;
        Rng cell = lattice.split(static_cast<std::uint64_t>(cy) * 1000003ULL + cx);
        if (cell.uniform() < tex.blob_density) {
          const double ox = static_cast<double>(cx * kCell) + cell.uniform(2.0, kCell - 2.0);
          const double oy = static_cast<double>(cy * kCell) + cell.uniform(2.0, kCell - 2.0);
          const double dx = static_cast<double>(x) + 0.5 - ox, dy = static_cast<double>(y) + 0.5 - oy;
          if (dx * dx + dy * dy <= tex.blob_radius * tex.blob_radius) c = tex.blob;
        }
      }
      const double a = tex.noise;
      const double rgb[3] = {c.r + noise.uniform(-a, a), c.g + noise.uniform(-a, a), c.b + noise.uniform(-a, a)};
      for (std::size_t ch = 0; ch < 3; ++ch)
        out.raster.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(rgb[ch]), 0, 255));
    }
  }
  return out;
}

SynthSpec parse_synth_layout(std::string_view layout) {
  auto fail = [&](const std::string& why) -> UsageError {
    return UsageError("synth layout '" + std::string(layout) + "': " + why);
  };
  SynthSpec spec;
  const auto colon = layout.find(':');
  std::string head(layout.substr(0, colon));
  auto at = head.find('@');
  if (at != std::string::npos) {
    spec.patch_size = std::stoul(head.substr(at + 1));
    head = head.substr(0, at);
  }
  const auto x = head.find('x');
  if (x == std::string::npos) throw fail("expected WxH");
  try {
    spec.width = std::stoul(head.substr(0, x));
    spec.height = std::stoul(head.substr(x + 1));
  } catch (const std::exception&) {
    throw fail("bad canvas size");
  }
  if (colon == std::string_view::npos) return spec;
  std::string rest(layout.substr(colon + 1));
  std::size_t pos = 0;
  while (pos < rest.size()) {
    auto end = rest.find(';', pos);
    if (end == std::string::npos) end = rest.size();
    const std::string item = rest.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const auto amp = item.find('@');
    if (amp == std::string::npos) throw fail("region '" + item + "' lacks '@'");
    auto kind = parse_tissue_kind(item.substr(0, amp));
    if (!kind) throw fail("unknown tissue kind '" + item.substr(0, amp) + "'");
    SynthRegion reg;
    reg.kind = *kind;
    std::size_t v[4];
    std::size_t p0 = amp + 1;
    for (int k = 0; k < 4; ++k) {
      auto comma = item.find(',', p0);
      if (k < 3 && comma == std::string::npos) throw fail("region '" + item + "' needs x,y,w,h");
      try {
        v[k] = std::stoul(item.substr(p0, (k < 3 ? comma : item.size()) - p0));
      } catch (const std::exception&) {
        throw fail("region '" + item + "' has a non-numeric field");
      }
      p0 = comma + 1;
    }
    reg.x = v[0];
    reg.y = v[1];
    reg.width = v[2];
    reg.height = v[3];
    spec.regions.push_back(reg);
  }
  return spec;
}

}  // namespace slidelm
