#include "slidelm/evaluation/baselines.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "slidelm/error.hpp"
#include "slidelm/evaluation/vqa.hpp"
#include "slidelm/rng.hpp"

namespace slidelm {

std::vector<std::size_t> sample_patches(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng g = Rng(seed).split("majority-vote");
  const std::size_t m = std::min(n, k);
  // Partial Fisher-Yates: the first m slots are a uniform sample without replacement.
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t j = i + static_cast<std::size_t>(g.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

std::optional<char> plurality_vote(const std::vector<std::optional<char>>& votes) {
  std::array<std::size_t, 26> counts{};
  bool any = false;
  for (const auto& v : votes) {
    if (!v || *v < 'A' || *v > 'Z') continue;
    ++counts[static_cast<std::size_t>(*v - 'A')];
    any = true;
  }
  if (!any) return std::nullopt;
  auto best = std::max_element(counts.begin(), counts.end());  // first maximum = alphabetical tie-break
  return static_cast<char>('A' + (best - counts.begin()));
}

std::optional<char> majority_vote_baseline(std::size_t n_patches,
                                           const std::function<std::optional<char>(std::size_t)>& answer_for_patch,
                                           std::uint64_t seed, std::size_t k) {
  if (n_patches == 0) throw UsageError("majority_vote_baseline: slide has no tissue patches");
  if (k == 0) throw UsageError("majority_vote_baseline: k must be positive");
  std::vector<std::optional<char>> votes;
  for (std::size_t i : sample_patches(n_patches, k, seed)) votes.push_back(answer_for_patch(i));
  return plurality_vote(votes);
}

std::optional<char> thumbnail_baseline(const Raster& slide, const std::vector<std::string>& options,
                                       const std::function<std::string(const Raster&)>& model) {
  if (slide.empty() || slide.width == 0 || slide.height == 0)
    throw UsageError("thumbnail_baseline: slide raster is empty");
  return extract_choice(model(thumbnail(slide, kThumbnailSide)), options);
}

std::string text_only_prompt(const std::string& question, const std::vector<std::string>& options) {
  std::string p = question + "\n";
  for (std::size_t i = 0; i < options.size(); ++i)
    p += std::string(1, static_cast<char>('A' + i)) + ". " + options[i] + "\n";
  p += "Answer with the letter of the correct option.";
  return p;
}

std::optional<char> text_only_baseline(const std::string& question, const std::vector<std::string>& options,
                                       const std::function<std::string(const std::string&)>& model) {
  return extract_choice(model(text_only_prompt(question, options)), options);
}

}  // namespace slidelm
