#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slidelm/error.hpp"
#include "slidelm/interpret/saliency.hpp"
#include "slidelm/rng.hpp"

namespace slidelm {
namespace {

namespace fs = std::filesystem;

AttentionTrace random_trace(Rng& rng, std::size_t steps, std::size_t layers, std::size_t heads, std::size_t n) {
  AttentionTrace t{layers, heads, n, std::vector<std::size_t>(steps, 7), {}};
  // Rows are softmax outputs restricted to the visual span, so they sum to < 1.
  for (std::size_t r = 0; r < steps * layers * heads; ++r) {
    std::vector<double> row(n + 2);
    double z = 0;
    for (double& v : row) z += (v = std::exp(2.0 * rng.normal()));
    for (std::size_t p = 0; p < n; ++p) t.weights.push_back(row[p] / z);
  }
  return t;
}

// Independent reference: explicit renormalise-average, then sort pairs.
std::vector<std::pair<std::size_t, double>> brute_force_top(const AttentionTrace& t, std::size_t k) {
  std::vector<double> score(t.n_patches, 0.0);
  std::size_t rows = 0;
  for (std::size_t s = 0; s < t.steps(); ++s)
    for (std::size_t l = 0; l < t.layers; ++l)
      for (std::size_t h = 0; h < t.heads; ++h, ++rows) {
        double z = 0;
        for (std::size_t p = 0; p < t.n_patches; ++p) z += t.at(s, l, h, p);
        for (std::size_t p = 0; p < t.n_patches; ++p) score[p] += t.at(s, l, h, p) / z;
      }
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t p = 0; p < t.n_patches; ++p) all.emplace_back(p, score[p] / rows);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

TEST(Saliency, SinglePatchCarriesAllWeight) {
  AttentionTrace t{2, 3, 6, {9, 10}, std::vector<double>(2 * 2 * 3 * 6, 0.0)};
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t h = 0; h < 3; ++h) t.at(s, l, h, 3) = 1.0;
  const auto sal = saliency(t, {.k = 1});
  ASSERT_EQ(sal.ranked.size(), 1u);
  EXPECT_EQ(sal.ranked[0].patch_index, 3u);
  EXPECT_DOUBLE_EQ(sal.ranked[0].score, 1.0);
}

TEST(Saliency, UniformAttentionTiesBreakByIndex) {
  AttentionTrace t{1, 1, 5, {4}, std::vector<double>(5, 0.2)};
  const auto sal = saliency(t);
  ASSERT_EQ(sal.ranked.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(sal.ranked[i].patch_index, i);
    EXPECT_NEAR(sal.ranked[i].score, 0.2, 1e-15);
  }
}

TEST(Saliency, MatchesBruteForceOnRandomTraces) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_trace(rng, 1 + rng.below(6), 1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(40));
    const auto sal = saliency(t);
    const auto ref = brute_force_top(t, 5);
    ASSERT_EQ(sal.ranked.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(sal.ranked[i].patch_index, ref[i].first);
      EXPECT_NEAR(sal.ranked[i].score, ref[i].second, 1e-12);
    }
  }
}

TEST(Saliency, ScoresFormADistribution) {
  Rng rng(5);
  const auto t = random_trace(rng, 4, 2, 2, 17);
  const auto sal = saliency(t);
  double sum = 0;
  for (double s : sal.scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    sum += s;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  for (std::size_t i = 1; i < sal.ranked.size(); ++i) EXPECT_GE(sal.ranked[i - 1].score, sal.ranked[i].score);
  // Raw mode keeps the mass that went to text positions out of the scores.
  const auto raw = saliency(t, {.renormalize = false});
  double raw_sum = 0;
  for (double s : raw.scores) raw_sum += s;
  EXPECT_LT(raw_sum, 1.0);
}

TEST(Saliency, PermutationEquivariant) {
  Rng rng(7);
  const auto t = random_trace(rng, 3, 2, 2, 9);
  std::vector<std::size_t> perm{4, 8, 0, 2, 7, 1, 5, 3, 6};
  AttentionTrace pt = t;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t p = 0; p < 9; ++p) pt.at(s, l, h, p) = t.at(s, l, h, perm[p]);
  const auto a = saliency(t, {.k = 9}), b = saliency(pt, {.k = 9});
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(perm[b.ranked[i].patch_index], a.ranked[i].patch_index);
}

TEST(Saliency, KClampedWithWarning) {
  AttentionTrace t{1, 1, 3, {4}, {0.5, 0.3, 0.2}};
  const auto sal = saliency(t, {.k = 5});
  EXPECT_EQ(sal.ranked.size(), 3u);
  EXPECT_FALSE(sal.warning.empty());
  EXPECT_TRUE(saliency(t, {.k = 3}).warning.empty());
}

TEST(Saliency, StepSubsetAndErrors) {
  AttentionTrace t{1, 1, 2, {6, 7}, {0.9, 0.1, 0.1, 0.9}};
  EXPECT_EQ(saliency(t, {.k = 1, .steps = {1}}).ranked[0].patch_index, 1u);
  EXPECT_EQ(saliency(t, {.k = 1, .steps = {0}}).ranked[0].patch_index, 0u);
  EXPECT_THROW(saliency(t, {.steps = {2}}), UsageError);
  EXPECT_THROW(saliency(AttentionTrace{}), UsageError);
}

PatchGrid two_by_two() {
  PatchGrid g;
  g.patch_size = 224;
  g.source_width = g.source_height = 448;
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) g.entries.push_back({r, c, c * 224, r * 224, true});
  return g;
}

TEST(Overlay, NoEntriesLeavesThumbnailUntouched) {
  const Raster thumb(64, 64, 3, 128);
  EXPECT_EQ(render_overlay(thumb, two_by_two(), PatchSaliency{}).pixels, thumb.pixels);
}

TEST(Overlay, TopLeftPatchMarksExactlyTopLeftQuadrant) {
  const Raster thumb(64, 64, 3, 128);
  PatchSaliency sal;
  sal.ranked = {{0, 1.0}};
  const Raster out = render_overlay(thumb, two_by_two(), sal);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const bool inside = x < 32 && y < 32;
      bool changed = false;
      for (std::size_t c = 0; c < 3; ++c) changed |= out.at(x, y, c) != thumb.at(x, y, c);
      EXPECT_EQ(changed, inside) << x << "," << y;
    }
  // Border pixel takes the full rank colour.
  EXPECT_EQ(out.at(0, 0, 0), 230);
  EXPECT_EQ(render_overlay(thumb, two_by_two(), sal).pixels, out.pixels);
}

TEST(Overlay, IndexOutsideGridIsUsageError) {
  PatchSaliency sal;
  sal.ranked = {{4, 1.0}};
  EXPECT_THROW(render_overlay(Raster(64, 64, 3, 128), two_by_two(), sal), UsageError);
}

TEST(Overlay, LetterboxedSlideMapsThroughPlacement) {
  PatchGrid g;
  g.patch_size = 224;
  g.source_width = 448;
  g.source_height = 224;
  g.entries = {{0, 0, 0, 0, true}, {0, 1, 224, 0, true}};
  PatchSaliency sal;
  sal.ranked = {{1, 1.0}};
  const Raster thumb(64, 64, 3, 128);
  const Raster out = render_overlay(thumb, g, sal);
  // Source 448×224 scales to 64×32, centred vertically at y = 16.
  EXPECT_NE(out.at(40, 20, 1), 128);
  EXPECT_EQ(out.at(40, 10, 1), 128);
  EXPECT_EQ(out.at(20, 20, 1), 128);
}

TEST(SaliencyCsv, Format) {
  PatchSaliency sal;
  sal.ranked = {{3, 0.5}, {1, 0.25}};
  const auto p = fs::temp_directory_path() / "slidelm_sal.csv";
  write_saliency_csv(p.string(), two_by_two(), sal);
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), "rank,patch_index,row,col,score\n1,3,1,1,0.5\n2,1,0,1,0.25\n");
  fs::remove(p);
}

TEST(AttentionTraceFile, RoundTripAndValidation) {
  Rng rng(9);
  const auto t = random_trace(rng, 2, 2, 2, 3);
  const auto p = (fs::temp_directory_path() / "slidelm_trace.json").string();
  save_attention_trace(p, t);
  const auto back = load_attention_trace(p);
  EXPECT_EQ(back.weights, t.weights);
  EXPECT_EQ(back.tokens, t.tokens);
  std::ofstream(p) << R"({"layers":1,"heads":1,"n_patches":2,"tokens":[1],"weights":[0.5]})";
  EXPECT_THROW(load_attention_trace(p), LoadError);
  fs::remove(p);
}

}  // namespace
}  // namespace slidelm
