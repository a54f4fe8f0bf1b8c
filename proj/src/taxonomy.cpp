#include "slidelm/evaluation/taxonomy.hpp"

#include <array>

namespace slidelm {

namespace {

constexpr std::array<NarrowCategory, 13> kCategories{{
    {"Microscopy", "Tissue Architecture and Arrangement", 696},
    {"Microscopy", "Tumor Characteristics", 562},
    {"Microscopy", "Cytomorphological Characteristics", 601},
    {"Microscopy", "Histopathological Changes", 633},
    {"Diagnosis", "Disease Detection", 581},
    {"Diagnosis", "Disease Classification", 532},
    {"Diagnosis", "Staging", 671},
    {"Diagnosis", "Grading", 601},
    {"Diagnosis", "Differential Diagnosis", 586},
    {"Clinical", "Treatment Guidance", 597},
    {"Clinical", "Biomarker Analysis", 502},
    {"Clinical", "Risk Factors", 591},
    {"Clinical", "Prognostic Assessment", 674},
}};

constexpr std::array<std::string_view, 3> kBroad{"Microscopy", "Diagnosis", "Clinical"};

const std::vector<LabelTask>& label_table() {
  static const std::vector<LabelTask> t{
      {"ER Status", {"Positive", "Negative"}, 1058},
      {"PR Status", {"Positive", "Negative"}, 1058},
      {"HER2 Status", {"Positive", "Negative"}, 1058},
      {"HER2 Expression", {"0", "1+", "2+", "3+"}, 1058},
      {"Histological Grading", {"1", "2", "3"}, 926},
      {"Molecular Subtype", {"Luminal A", "Luminal B", "HER2(+)", "Triple negative"}, 1058},
      {"Tumor Type", {"Invasive ductal carcinoma", "Invasive lobular carcinoma", "Other Type"}, 1058},
  };
  return t;
}

}  // namespace

std::span<const NarrowCategory> vqa_categories() { return kCategories; }
std::span<const std::string_view> broad_categories() { return kBroad; }
std::span<const LabelTask> label_tasks() { return label_table(); }

bool valid_category(std::string_view broad, std::string_view narrow) {
  for (const auto& c : kCategories)
    if (c.broad == broad && c.narrow == narrow) return true;
  if (broad == kLabelTaskFamily)
    for (const auto& t : label_table())
      if (t.name == narrow) return true;
  return false;
}

}  // namespace slidelm
