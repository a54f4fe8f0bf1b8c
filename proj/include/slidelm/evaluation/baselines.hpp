#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slidelm/slide_io/raster.hpp"

namespace slidelm {

inline constexpr std::size_t kMajorityVotePatches = 30;
inline constexpr std::size_t kThumbnailSide = 1024;

/// Seeded sample of min(k, n) distinct indices from 0..n-1, in sampled order.
std::vector<std::size_t> sample_patches(std::size_t n, std::size_t k, std::uint64_t seed);

/// Most frequent letter; ties go to the alphabetically first letter. Empty
/// votes are ignored; none when no vote is cast.
std::optional<char> plurality_vote(const std::vector<std::optional<char>>& votes);

/// Asks `answer_for_patch` about min(k, n) sampled tissue patches and returns
/// the plurality letter. Throws UsageError when the slide has no patches.
std::optional<char> majority_vote_baseline(std::size_t n_patches,
                                           const std::function<std::optional<char>(std::size_t)>& answer_for_patch,
                                           std::uint64_t seed, std::size_t k = kMajorityVotePatches);

/// One call to `model` with the 1024×1024 letterboxed thumbnail of `slide`;
/// the reply is mapped through extract_choice. Throws UsageError on an empty
/// raster.
std::optional<char> thumbnail_baseline(const Raster& slide, const std::vector<std::string>& options,
                                       const std::function<std::string(const Raster&)>& model);

/// Text-only prompt: question and lettered options, no image.
std::string text_only_prompt(const std::string& question, const std::vector<std::string>& options);

/// One call to `model` with the text-only prompt; reply mapped through
/// extract_choice.
std::optional<char> text_only_baseline(const std::string& question, const std::vector<std::string>& options,
                                       const std::function<std::string(const std::string&)>& model);

}  // namespace slidelm
