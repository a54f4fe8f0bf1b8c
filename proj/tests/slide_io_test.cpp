#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "slidelm/error.hpp"
#include "slidelm/rng.hpp"
#include "slidelm/slide_io/manifest.hpp"
#include "slidelm/slide_io/raster.hpp"
#include "slidelm/slide_io/synth.hpp"
#include "slidelm/slide_io/tiling.hpp"

namespace slidelm {
namespace {

namespace fs = std::filesystem;

Raster solid(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Raster out(w, h, 3);
  for (std::size_t i = 0; i < w * h; ++i) {
    out.pixels[3 * i] = r;
    out.pixels[3 * i + 1] = g;
    out.pixels[3 * i + 2] = b;
  }
  return out;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("slidelm_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(TileSlide, AllTissue448GivesFourTiles) {
  PatchGrid g = tile_slide(solid(448, 448, 255, 0, 255), 224);
  ASSERT_EQ(g.entries.size(), 4u);
  const std::vector<std::pair<std::size_t, std::size_t>> origins{{0, 0}, {224, 0}, {0, 224}, {224, 224}};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(g.entries[k].x, origins[k].first);
    EXPECT_EQ(g.entries[k].y, origins[k].second);
    EXPECT_TRUE(g.entries[k].tissue);
  }
}

TEST(TileSlide, PartialEdgeTilesDropped) {
  PatchGrid g = tile_slide(solid(500, 500, 200, 100, 150), 224);
  EXPECT_EQ(g.entries.size(), 4u);
  EXPECT_EQ(g.rows(), 2u);
  EXPECT_EQ(g.cols(), 2u);
}

TEST(TileSlide, WhiteRasterHasNoTissue) {
  PatchGrid g = tile_slide(solid(448, 448, 255, 255, 255), 224);
  EXPECT_EQ(g.entries.size(), 4u);
  EXPECT_EQ(g.tissue_count(), 0u);
}

TEST(TileSlide, RasterSmallerThanPatchGivesEmptyGrid) {
  PatchGrid g = tile_slide(solid(100, 300, 255, 0, 255), 224);
  EXPECT_TRUE(g.entries.empty());
}

TEST(TileSlide, ZeroPatchSizeIsUsageError) {
  EXPECT_THROW(tile_slide(solid(10, 10, 0, 0, 0), 0), UsageError);
}

TEST(TileSlide, PartitionAndOrderingProperties) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 8 + rng.below(24);
    Raster r(p + rng.below(5 * p), p + rng.below(5 * p), 3);
    for (auto& v : r.pixels) v = static_cast<std::uint8_t>(rng.below(256));
    PatchGrid g = tile_slide(r, p);
    PatchGrid g4 = tile_slide(r, p, {}, 4);
    EXPECT_EQ(g, g4);
    std::vector<int> cover(r.width * r.height, 0);
    for (std::size_t k = 0; k < g.entries.size(); ++k) {
      const auto& e = g.entries[k];
      EXPECT_EQ(e.x % p, 0u);
      EXPECT_EQ(e.y % p, 0u);
      EXPECT_LE(e.x + p, r.width);
      EXPECT_LE(e.y + p, r.height);
      if (k) EXPECT_LT(std::pair(g.entries[k - 1].row, g.entries[k - 1].col), std::pair(e.row, e.col));
      for (std::size_t y = e.y; y < e.y + p; ++y)
        for (std::size_t x = e.x; x < e.x + p; ++x) cover[y * r.width + x]++;
    }
    std::size_t covered = 0;
    for (int c : cover) {
      ASSERT_LE(c, 1);
      covered += static_cast<std::size_t>(c);
    }
    EXPECT_EQ(covered, p * p * g.entries.size());
  }
}

TEST(TissueFilter, WhiteIsBackgroundMagentaIsTissue) {
  EXPECT_FALSE(tissue_filter(solid(224, 224, 255, 255, 255)));
  EXPECT_TRUE(tissue_filter(solid(224, 224, 255, 0, 255)));
}

TEST(TissueFilter, HalfAndHalfDependsOnTissueFraction) {
  Raster r = solid(224, 224, 255, 255, 255);
  for (std::size_t y = 0; y < 112; ++y)
    for (std::size_t x = 0; x < 224; ++x) {
      r.at(x, y, 0) = 255;
      r.at(x, y, 1) = 0;
      r.at(x, y, 2) = 255;
    }
  EXPECT_DOUBLE_EQ(stained_fraction(r, 0.08), 0.5);
  EXPECT_TRUE(tissue_filter(r, {.saturation_threshold = 0.08, .tissue_fraction = 0.25}));
  EXPECT_FALSE(tissue_filter(r, {.saturation_threshold = 0.08, .tissue_fraction = 0.75}));
}

TEST(TissueFilter, ExtremesHoldForEveryThreshold) {
  const Raster white = solid(16, 16, 255, 255, 255);
  const Raster magenta = solid(16, 16, 255, 0, 255);
  for (double t = 0.01; t < 1.0; t += 0.01) {
    TissueFilterConfig cfg{.saturation_threshold = t, .tissue_fraction = t};
    EXPECT_FALSE(tissue_filter(white, cfg)) << t;
    EXPECT_TRUE(tissue_filter(magenta, cfg)) << t;
  }
}

TEST(Thumbnail, UniformGrayStaysGray) {
  Raster t = thumbnail(solid(2048, 2048, 128, 128, 128), 1024);
  EXPECT_EQ(t.width, 1024u);
  EXPECT_EQ(t.height, 1024u);
  for (auto v : t.pixels) ASSERT_EQ(v, 128);
}

TEST(Thumbnail, BlockImageHalvesToBlockMeans) {
  // 4×4 gray image; each 2×2 block holds {a, a+10, a+20, a+30}, mean a+15.
  Raster r(4, 4, 1);
  const std::uint8_t base[2][2] = {{0, 100}, {40, 200}};
  for (std::size_t by = 0; by < 2; ++by)
    for (std::size_t bx = 0; bx < 2; ++bx) {
      const std::uint8_t a = base[by][bx];
      r.at(2 * bx, 2 * by, 0) = a;
      r.at(2 * bx + 1, 2 * by, 0) = a + 10;
      r.at(2 * bx, 2 * by + 1, 0) = a + 20;
      r.at(2 * bx + 1, 2 * by + 1, 0) = a + 30;
    }
  Raster t = thumbnail(r, 2);
  EXPECT_EQ(t.at(0, 0, 0), 15);
  EXPECT_EQ(t.at(1, 0, 0), 115);
  EXPECT_EQ(t.at(0, 1, 0), 55);
  EXPECT_EQ(t.at(1, 1, 0), 215);
}

TEST(Thumbnail, NonSquareIsLetterboxedOnWhite) {
  Raster t = thumbnail(solid(1000, 2000, 10, 20, 30), 1024);
  const ThumbnailPlacement p = thumbnail_placement(1000, 2000, 1024);
  EXPECT_EQ(p.width, 512u);
  EXPECT_EQ(p.height, 1024u);
  EXPECT_EQ(p.offset_x, 256u);
  EXPECT_EQ(p.offset_y, 0u);
  ASSERT_EQ(t.width, 1024u);
  ASSERT_EQ(t.height, 1024u);
  EXPECT_EQ(t.at(0, 500, 0), 255);
  EXPECT_EQ(t.at(255, 500, 2), 255);
  EXPECT_EQ(t.at(256, 500, 0), 10);
  EXPECT_EQ(t.at(767, 500, 2), 30);
  EXPECT_EQ(t.at(768, 500, 1), 255);
}

TEST(Thumbnail, ZeroTargetIsUsageError) { EXPECT_THROW(thumbnail(solid(4, 4, 0, 0, 0), 0), UsageError); }

TEST(Pnm, RoundTripIsBitExact) {
  Rng rng(9);
  for (std::size_t c : {1u, 3u}) {
    Raster r(37, 11, c);
    for (auto& v : r.pixels) v = static_cast<std::uint8_t>(rng.below(256));
    auto path = (temp_dir("pnm") / "img.pnm").string();
    write_pnm(path, r);
    EXPECT_EQ(read_pnm(path), r);
  }
}

TEST(Pnm, HeaderCommentsAreSkipped) {
  std::string bytes = "P5\n# made by hand\n2 1\n255\n";
  bytes += static_cast<char>(7);
  bytes += static_cast<char>(200);
  Raster r = decode_pnm(bytes);
  EXPECT_EQ(r.width, 2u);
  EXPECT_EQ(r.channels, 1u);
  EXPECT_EQ(r.pixels[1], 200);
}

TEST(Pnm, RejectsUnsupportedInputs) {
  EXPECT_THROW(decode_pnm("P3\n1 1\n255\n0 0 0"), LoadError);
  EXPECT_THROW(decode_pnm("P6\n1 1\n65535\n......"), LoadError);
  EXPECT_THROW(decode_pnm("P6\n2 2\n255\nab"), LoadError);
  EXPECT_THROW(read_pnm("/nonexistent/slide.ppm"), LoadError);
}

SynthSpec quadrant_spec() {
  SynthSpec spec;
  spec.regions.push_back({0, 0, 224, 224, TissueKind::tumor});
  return spec;
}

TEST(Synth, OneQuadrantMarksOneTile) {
  SynthSlide s = synth_slide(1, quadrant_spec());
  ASSERT_EQ(s.tile_labels.size(), 4u);
  EXPECT_EQ(s.tile_labels[0], TissueKind::tumor);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(s.tile_labels[i], TissueKind::background);
}

TEST(Synth, SameSeedSameBytesDifferentSeedSameLabels) {
  SynthSlide a = synth_slide(5, quadrant_spec());
  SynthSlide b = synth_slide(5, quadrant_spec());
  SynthSlide c = synth_slide(6, quadrant_spec());
  EXPECT_EQ(a.raster, b.raster);
  EXPECT_NE(a.raster.pixels, c.raster.pixels);
  EXPECT_EQ(a.tile_labels, c.tile_labels);
}

TEST(Synth, OverlappingOrMisalignedRegionsRejected) {
  SynthSpec overlap = quadrant_spec();
  overlap.regions.push_back({0, 0, 448, 224, TissueKind::stroma});
  EXPECT_THROW(synth_slide(1, overlap), UsageError);
  SynthSpec misaligned;
  misaligned.regions.push_back({10, 0, 224, 224, TissueKind::tumor});
  EXPECT_THROW(synth_slide(1, misaligned), UsageError);
  SynthSpec outside;
  outside.regions.push_back({224, 224, 448, 224, TissueKind::tumor});
  EXPECT_THROW(synth_slide(1, outside), UsageError);
}

TEST(Synth, LabelsAgreeWithTissueFlags) {
  SynthSpec spec;
  spec.width = 672;
  spec.height = 448;
  spec.regions = {{0, 0, 224, 224, TissueKind::tumor},
                  {224, 0, 224, 224, TissueKind::stroma},
                  {448, 0, 224, 224, TissueKind::necrosis},
                  {0, 224, 224, 224, TissueKind::lymphocytes}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSlide s = synth_slide(seed, spec);
    PatchGrid g = tile_slide(s.raster, 224);
    ASSERT_EQ(g.entries.size(), s.tile_labels.size());
    for (std::size_t k = 0; k < g.entries.size(); ++k)
      EXPECT_EQ(g.entries[k].tissue, s.tile_labels[k] != TissueKind::background) << "tile " << k;
  }
}

TEST(Synth, LayoutStringParses) {
  SynthSpec spec = parse_synth_layout("672x448@224:tumor@0,0,224,224;stroma@224,0,448,224");
  EXPECT_EQ(spec.width, 672u);
  EXPECT_EQ(spec.height, 448u);
  ASSERT_EQ(spec.regions.size(), 2u);
  EXPECT_EQ(spec.regions[1].kind, TissueKind::stroma);
  EXPECT_EQ(spec.regions[1].width, 448u);
  EXPECT_THROW(parse_synth_layout("448x448:plasma@0,0,224,224"), UsageError);
  EXPECT_THROW(parse_synth_layout("448:tumor@0,0,224,224"), UsageError);
}

TEST(PatchGridFile, RoundTripAndValidation) {
  PatchGrid g = tile_slide(synth_slide(2, quadrant_spec()).raster, 224);
  auto dir = temp_dir("grid");
  auto path = (dir / "grid.tsv").string();
  write_patch_grid(path, g);
  EXPECT_EQ(read_patch_grid(path), g);

  std::ofstream(dir / "bad.tsv") << "# patch_size=224 width=448 height=448\n0 1 224 0 1\n0 0 0 0 1\n";
  EXPECT_THROW(read_patch_grid((dir / "bad.tsv").string()), LoadError);
  std::ofstream(dir / "off.tsv") << "# patch_size=224 width=448 height=448\n0 0 10 0 1\n";
  EXPECT_THROW(read_patch_grid((dir / "off.tsv").string()), LoadError);
}

TEST(Manifest, RoundTripResolvesRelativePaths) {
  auto dir = temp_dir("manifest");
  std::ofstream(dir / "slide.ppm") << "x";
  std::ofstream(dir / "grid.tsv") << "x";
  SlideManifest m{"S1", "slide.ppm", "grid.tsv", std::nullopt, {"q1", "q2"}};
  write_manifest((dir / "m.txt").string(), m);
  SlideManifest back = read_manifest((dir / "m.txt").string());
  EXPECT_EQ(back.slide_id, "S1");
  EXPECT_EQ(back.raster_path, (dir / "slide.ppm").string());
  EXPECT_EQ(back.record_ids, (std::vector<std::string>{"q1", "q2"}));
  EXPECT_FALSE(back.embeddings_path);

  m.embeddings_path = "missing.bin";
  write_manifest((dir / "m2.txt").string(), m);
  EXPECT_THROW(read_manifest((dir / "m2.txt").string()), LoadError);
  EXPECT_THROW(check_unique_slide_ids({back, back}), UsageError);
}

}  // namespace
}  // namespace slidelm
