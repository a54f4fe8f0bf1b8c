#include "slidelm/interpret/saliency.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 5> kRankColours{{
    {230, 25, 25}, {245, 130, 20}, {240, 220, 30}, {40, 170, 60}, {30, 90, 220}}};

// 3×5 bitmap digits, one row per entry, bit 2 = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits{{{7, 5, 5, 5, 7},
                                                                {2, 6, 2, 2, 7},
                                                                {7, 1, 7, 4, 7},
                                                                {7, 1, 7, 1, 7},
                                                                {5, 5, 7, 1, 1},
                                                                {7, 4, 7, 1, 7},
                                                                {7, 4, 7, 5, 7},
                                                                {7, 1, 1, 1, 1},
                                                                {7, 5, 7, 5, 7},
                                                                {7, 5, 7, 1, 7}}};

void put(Raster& r, std::size_t x, std::size_t y, const std::array<std::uint8_t, 3>& c, double alpha) {
  for (std::size_t ch = 0; ch < r.channels; ++ch) {
    const double src = c[r.channels == 3 ? ch : 0];
    auto& px = r.at(x, y, ch);
    px = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * px + alpha * src));
  }
}

}  // namespace

PatchSaliency saliency(const AttentionTrace& t, const SaliencyOptions& opts) {
  if (t.steps() == 0 || t.n_patches == 0 || t.layers == 0 || t.heads == 0)
    throw UsageError("saliency: empty attention trace");
  if (t.weights.size() != t.steps() * t.layers * t.heads * t.n_patches)
    throw UsageError("saliency: trace weights do not match its dimensions");
  PatchSaliency s;
  s.steps = opts.steps;
  if (s.steps.empty()) {
    s.steps.resize(t.steps());
    std::iota(s.steps.begin(), s.steps.end(), std::size_t{0});
  }
  for (std::size_t st : s.steps)
    if (st >= t.steps()) throw UsageError("saliency: step " + std::to_string(st) + " out of range");

  const std::size_t n = t.n_patches;
  s.scores.assign(n, 0.0);
  for (std::size_t st : s.steps)
    for (std::size_t l = 0; l < t.layers; ++l)
      for (std::size_t h = 0; h < t.heads; ++h) {
        double mass = 1.0;
        if (opts.renormalize) {
          mass = 0.0;
          for (std::size_t p = 0; p < n; ++p) mass += t.at(st, l, h, p);
        }
        if (mass <= 0.0) continue;
        for (std::size_t p = 0; p < n; ++p) s.scores[p] += t.at(st, l, h, p) / mass;
      }
  const double rows = static_cast<double>(s.steps.size() * t.layers * t.heads);
  for (double& v : s.scores) v /= rows;

  std::size_t k = opts.k;
  if (k > n) {
    s.warning = "requested top-" + std::to_string(k) + " but the slide has " + std::to_string(n) +
                " patches; clamped to " + std::to_string(n);
    k = n;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  for (std::size_t i = 0; i < k; ++i) s.ranked.push_back({idx[i], s.scores[idx[i]]});
  return s;
}

Raster render_overlay(const Raster& thumbnail, const PatchGrid& grid, const PatchSaliency& sal) {
  Raster out = thumbnail;
  if (sal.ranked.empty()) return out;
  const auto tiles = grid.tissue_entries();
  const ThumbnailPlacement pl =
      thumbnail_placement(grid.source_width, grid.source_height, std::max(thumbnail.width, thumbnail.height));
  auto map = [&](std::size_t v, std::size_t off) { return off + static_cast<std::size_t>(std::lround(v * pl.scale)); };
  for (std::size_t rank = sal.ranked.size(); rank-- > 0;) {  // best rank drawn last, on top
    const std::size_t idx = sal.ranked[rank].patch_index;
    if (idx >= tiles.size())
      throw UsageError("overlay: patch index " + std::to_string(idx) + " outside grid with " +
                       std::to_string(tiles.size()) + " tissue tiles");
    const PatchEntry& e = tiles[idx];
    const std::size_t x0 = map(e.x, pl.offset_x), y0 = map(e.y, pl.offset_y);
    const std::size_t x1 = std::min(out.width, map(e.x + grid.patch_size, pl.offset_x));
    const std::size_t y1 = std::min(out.height, map(e.y + grid.patch_size, pl.offset_y));
    if (x1 <= x0 || y1 <= y0) continue;
    const auto& colour = kRankColours[rank % kRankColours.size()];
    for (std::size_t y = y0; y < y1; ++y)
      for (std::size_t x = x0; x < x1; ++x) {
        const bool border = x < x0 + 3 || y < y0 + 3 || x + 3 >= x1 || y + 3 >= y1;
        put(out, x, y, colour, border ? 1.0 : 0.3);
      }
    const std::size_t digit = (rank + 1) % 10;
    if (x1 - x0 >= 3 + 3 + 2 && y1 - y0 >= 5 + 3 + 2) {
      for (std::size_t gy = 0; gy < 5; ++gy)
        for (std::size_t gx = 0; gx < 3; ++gx)
          if (kDigits[digit][gy] & (4 >> gx)) put(out, x0 + 4 + gx, y0 + 4 + gy, {0, 0, 0}, 1.0);
    }
  }
  return out;
}

void write_saliency_csv(const std::string& path, const PatchGrid& grid, const PatchSaliency& sal) {
  const auto tiles = grid.tissue_entries();
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path + " for writing");
  f << "rank,patch_index,row,col,score\n" << std::setprecision(17);
  for (std::size_t r = 0; r < sal.ranked.size(); ++r) {
    const auto& e = sal.ranked[r];
    if (e.patch_index >= tiles.size()) throw UsageError("saliency index outside grid");
    f << r + 1 << ',' << e.patch_index << ',' << tiles[e.patch_index].row << ',' << tiles[e.patch_index].col << ','
      << e.score << '\n';
  }
}

}  // namespace slidelm
