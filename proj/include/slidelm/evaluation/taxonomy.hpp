#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slidelm {

struct NarrowCategory {
  std::string_view broad;
  std::string_view narrow;
  std::size_t benchmark_items;  // closed-set items in the published TCGA benchmark
};

/// The three broad families and their thirteen narrow categories.
std::span<const NarrowCategory> vqa_categories();
std::span<const std::string_view> broad_categories();

/// Broad family used for label-derived breast-biopsy tasks.
inline constexpr std::string_view kLabelTaskFamily = "BCNB";

struct LabelTask {
  std::string_view name;
  std::vector<std::string_view> labels;
  std::size_t benchmark_items;
};

/// Seven classification tasks turned into closed-set questions.
std::span<const LabelTask> label_tasks();

/// True for a (broad, narrow) pair from either table.
bool valid_category(std::string_view broad, std::string_view narrow);

}  // namespace slidelm
