#include "slidelm/encoder/patch_encoder.hpp"

#include <algorithm>
#include <cmath>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

double saturation(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  return mx <= 0.0 ? 0.0 : (mx - mn) / mx;
}

}  // namespace

PatchEncoder::PatchEncoder(ParameterStore& store, const PatchEncoderConfig& cfg) : cfg_(cfg) {
  if (cfg.dim == 0) throw ConfigError("patch_encoder.dim", "must be positive");
  if (cfg.patch_size == 0) throw ConfigError("patch_encoder.patch_size", "must be positive");
  Rng rng(cfg.seed);
  Rng wr = rng.split("weight");
  Rng br = rng.split("bias");
  const double ws = 2.0 / std::sqrt(static_cast<double>(kStatCount));
  Tensor w = Tensor::matrix(kStatCount, cfg.dim);
  for (double& v : w.values()) v = ws * wr.normal();
  Tensor b({cfg.dim});
  for (double& v : b.values()) v = 0.1 * br.normal();
  weight_ = store.add("patch_encoder.proj.w", std::move(w), false);
  bias_ = store.add("patch_encoder.proj.b", std::move(b), false);
}

std::vector<double> PatchEncoder::pooled_statistics(const Raster& patch) {
  const std::size_t w = patch.width, h = patch.height, c = patch.channels;
  if (w == 0 || h == 0) throw UsageError("pooled_statistics: empty patch");
  std::vector<double> stats(kStatCount, 0.0);
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  double sat_sum = 0, stained = 0, dark = 0, bright = 0, gx = 0, gy = 0;
  std::vector<double> gray(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double rgb[3];
      for (int k = 0; k < 3; ++k) rgb[k] = patch.at(x, y, c == 3 ? k : 0) / 255.0;
      for (int k = 0; k < 3; ++k) {
        sum[k] += rgb[k];
        sq[k] += rgb[k] * rgb[k];
      }
      const double s = c == 3 ? saturation(rgb[0], rgb[1], rgb[2]) : 1.0 - rgb[0];
      sat_sum += s;
      if (s > 0.08) stained += 1;
      const double g = (rgb[0] + rgb[1] + rgb[2]) / 3.0;
      gray[y * w + x] = g;
      if (g < 0.4) dark += 1;
      if (g > 0.86) bright += 1;
    }
  }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x + 1 < w; ++x) gx += std::abs(gray[y * w + x + 1] - gray[y * w + x]);
  for (std::size_t y = 0; y + 1 < h; ++y)
    for (std::size_t x = 0; x < w; ++x) gy += std::abs(gray[(y + 1) * w + x] - gray[y * w + x]);
  const double n = static_cast<double>(w * h);
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / n;
    stats[k] = mean;
    stats[3 + k] = 2.0 * std::sqrt(std::max(0.0, sq[k] / n - mean * mean));
  }
  stats[6] = sat_sum / n;
  stats[7] = stained / n;
  stats[8] = dark / n;
  stats[9] = bright / n;
  stats[10] = w > 1 ? std::min(1.0, 4.0 * gx / static_cast<double>(h * (w - 1))) : 0.0;
  stats[11] = h > 1 ? std::min(1.0, 4.0 * gy / static_cast<double>(w * (h - 1))) : 0.0;
  return stats;
}

std::vector<double> PatchEncoder::encode(const Raster& patch) const {
  if (patch.width != cfg_.patch_size || patch.height != cfg_.patch_size)
    throw UsageError("patch encoder expects " + std::to_string(cfg_.patch_size) + "x" +
                     std::to_string(cfg_.patch_size) + " patches, got " + std::to_string(patch.width) + "x" +
                     std::to_string(patch.height));
  const auto stats = pooled_statistics(patch);
  std::vector<double> out(cfg_.dim);
  const Tensor& w = weight_.value();
  const Tensor& b = bias_.value();
  for (std::size_t j = 0; j < cfg_.dim; ++j) {
    double z = b[j];
    for (std::size_t i = 0; i < kStatCount; ++i) z += w(i, j) * (2.0 * stats[i] - 1.0);
    // Stored as float32 on disk; round here so in-memory and file features agree.
    out[j] = static_cast<float>(std::tanh(z));
  }
  return out;
}

EmbeddingMatrix PatchEncoder::encode_slide(const Raster& slide, const PatchGrid& grid) const {
  if (grid.patch_size != cfg_.patch_size)
    throw UsageError("grid patch size " + std::to_string(grid.patch_size) + " != encoder patch size " +
                     std::to_string(cfg_.patch_size));
  const auto tiles = grid.tissue_entries();
  if (tiles.empty()) throw UsageError("slide has no tissue tiles to encode");
  Tensor t = Tensor::matrix(tiles.size(), cfg_.dim);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto f = encode(extract_patch(slide, grid, tiles[i]));
    std::copy(f.begin(), f.end(), t.row(i).begin());
  }
  return {std::move(t)};
}

}  // namespace slidelm
