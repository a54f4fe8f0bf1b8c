#include "slidelm/slide_io/tiling.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "slidelm/error.hpp"

namespace slidelm {

std::size_t PatchGrid::tissue_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.tissue; }));
}

std::vector<PatchEntry> PatchGrid::tissue_entries() const {
  std::vector<PatchEntry> out;
  for (const auto& e : entries)
    if (e.tissue) out.push_back(e);
  return out;
}

double stained_fraction(const Raster& patch, double saturation_threshold) {
  if (patch.empty()) return 0.0;
  const std::size_t n = patch.width * patch.height;
  std::size_t stained = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s;
    if (patch.channels == 3) {
      const auto* px = &patch.pixels[i * 3];
      const int mx = std::max({px[0], px[1], px[2]});
      const int mn = std::min({px[0], px[1], px[2]});
      s = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
    } else {
      s = 1.0 - patch.pixels[i] / 255.0;
    }
    if (s > saturation_threshold) ++stained;
  }
  return static_cast<double>(stained) / static_cast<double>(n);
}

bool tissue_filter(const Raster& patch, const TissueFilterConfig& cfg) {
  return stained_fraction(patch, cfg.saturation_threshold) >= cfg.tissue_fraction;
}

PatchGrid tile_slide(const Raster& r, std::size_t patch_size, const TissueFilterConfig& cfg, unsigned jobs) {
  if (patch_size == 0) throw UsageError("tile_slide: patch_size must be >= 1");
  if (r.empty()) throw UsageError("tile_slide: empty raster");
  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.source_width = r.width;
  grid.source_height = r.height;
  const std::size_t rows = r.height / patch_size, cols = r.width / patch_size;
  grid.entries.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) grid.entries[i * cols + j] = {i, j, j * patch_size, i * patch_size, false};

  auto classify = [&](std::size_t begin, std::size_t step) {
    for (std::size_t k = begin; k < grid.entries.size(); k += step) {
      auto& e = grid.entries[k];
      e.tissue = tissue_filter(r.crop(e.x, e.y, patch_size, patch_size), cfg);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, grid.entries.size()))));
  if (jobs == 1) {
    classify(0, 1);
  } else {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) workers.emplace_back(classify, w, jobs);
  }
  return grid;
}

Raster extract_patch(const Raster& r, const PatchGrid& grid, const PatchEntry& e) {
  return r.crop(e.x, e.y, grid.patch_size, grid.patch_size);
}

void write_patch_grid(const std::string& path, const PatchGrid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write patch grid '" + path + "'");
  out << "# patch_size=" << grid.patch_size << " width=" << grid.source_width << " height=" << grid.source_height
      << "\n# row col x y tissue\n";
  for (const auto& e : grid.entries) out << e.row << ' ' << e.col << ' ' << e.x << ' ' << e.y << ' ' << e.tissue << '\n';
}

PatchGrid read_patch_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open patch grid '" + path + "'");
  PatchGrid grid;
  grid.patch_size = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq);
        const std::size_t value = std::stoul(kv.substr(eq + 1));
        if (key == "patch_size") grid.patch_size = value;
        else if (key == "width") grid.source_width = value;
        else if (key == "height") grid.source_height = value;
      }
      continue;
    }
    std::istringstream ss(line);
    PatchEntry e;
    int tissue = 0;
    if (!(ss >> e.row >> e.col >> e.x >> e.y >> tissue) || (tissue != 0 && tissue != 1))
      throw LoadError(path + ": malformed patch grid line '" + line + "'");
    e.tissue = tissue == 1;
    grid.entries.push_back(e);
  }
  if (grid.patch_size == 0) throw LoadError(path + ": missing patch_size header");
  for (std::size_t k = 0; k < grid.entries.size(); ++k) {
    const auto& e = grid.entries[k];
    if (e.x % grid.patch_size || e.y % grid.patch_size || e.x + grid.patch_size > grid.source_width ||
        e.y + grid.patch_size > grid.source_height)
      throw LoadError(path + ": tile origin outside the source or not patch-aligned");
    if (k > 0) {
      const auto& p = grid.entries[k - 1];
      if (std::pair(p.row, p.col) >= std::pair(e.row, e.col))
        throw LoadError(path + ": entries are not sorted row-major or contain duplicates");
    }
  }
  return grid;
}

}  // namespace slidelm
