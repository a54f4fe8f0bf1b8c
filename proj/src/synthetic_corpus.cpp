#include "slidelm/training/synthetic_corpus.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

constexpr std::array<TissueKind, 4> kKinds{TissueKind::tumor, TissueKind::stroma, TissueKind::necrosis,
                                           TissueKind::lymphocytes};

std::string number_word(std::size_t n) {
  static const char* words[] = {"zero", "one",  "two",   "three",    "four",    "five",    "six",
                                "seven", "eight", "nine", "ten",      "eleven",  "twelve",  "thirteen",
                                "fourteen", "fifteen", "sixteen"};
  return n <= 16 ? words[n] : std::to_string(n);
}

}  // namespace

std::string caption_for_counts(const std::map<TissueKind, std::size_t>& counts) {
  std::vector<std::pair<std::string, std::size_t>> items;
  for (const auto& [k, n] : counts)
    if (n > 0 && k != TissueKind::background) items.emplace_back(std::string(to_string(k)), n);
  if (items.empty()) return "no tissue";
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
  std::string out;
  for (const auto& [name, n] : items) {
    if (!out.empty()) out += " and ";
    out += number_word(n) + " " + name + (n == 1 ? " tile" : " tiles");
  }
  return out;
}

std::vector<SyntheticCase> synthetic_cases(std::size_t k, std::uint64_t seed, std::size_t patch_size,
                                           std::size_t grid) {
  if (grid == 0 || patch_size == 0) throw UsageError("synthetic_cases: grid and patch size must be positive");
  const std::size_t slots = grid * grid;
  std::vector<std::array<std::size_t, 4>> multisets;
  for (std::size_t a = 0; a <= slots; ++a)
    for (std::size_t b = 0; a + b <= slots; ++b)
      for (std::size_t c = 0; a + b + c <= slots; ++c)
        for (std::size_t d = 0; a + b + c + d <= slots; ++d)
          // A common factor would repeat another multiset's proportions, which
          // attention (a weighted average) cannot tell apart.
          if (a + b + c + d > 0 && std::gcd(std::gcd(a, b), std::gcd(c, d)) == 1) multisets.push_back({a, b, c, d});
  if (k > multisets.size())
    throw UsageError("synthetic_cases: at most " + std::to_string(multisets.size()) + " distinct slides on a " +
                     std::to_string(grid) + "x" + std::to_string(grid) + " grid");
  Rng rng(seed);
  Rng pick = rng.split("multisets");
  pick.shuffle(multisets);
  std::vector<SyntheticCase> out;
  for (std::size_t i = 0; i < k; ++i) {
    SyntheticCase c;
    c.slide_id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);
    c.spec.width = c.spec.height = grid * patch_size;
    c.spec.patch_size = patch_size;
    std::vector<TissueKind> layout;
    for (std::size_t j = 0; j < 4; ++j) {
      layout.insert(layout.end(), multisets[i][j], kKinds[j]);
      if (multisets[i][j]) c.counts[kKinds[j]] = multisets[i][j];
    }
    layout.resize(slots, TissueKind::background);
    Rng place = rng.split(static_cast<std::uint64_t>(i));
    place.shuffle(layout);
    for (std::size_t s = 0; s < slots; ++s)
      if (layout[s] != TissueKind::background)
        c.spec.regions.push_back({(s % grid) * patch_size, (s / grid) * patch_size, patch_size, patch_size, layout[s]});
    c.caption = caption_for_counts(c.counts);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace slidelm
