#pragma once

#include <string>
#include <string_view>

namespace slidelm::prompts {

// Generation templates, kept character-for-character (typos included) so
// their hashes identify the exact wording used.
extern const std::string_view kReportClean;
extern const std::string_view kCaptionGeneration;
extern const std::string_view kSystem;
extern const std::string_view kGeneral;
extern const std::string_view kLabelTransformation;

/// Objective prompt for one broad category: its definition followed by every
/// narrow category with its scope. Throws UsageError for an unknown family.
std::string objective(std::string_view broad);

/// Scope sentence of a broad or narrow category; empty when unknown.
std::string_view broad_scope(std::string_view broad);
std::string_view narrow_scope(std::string_view narrow);

/// SHA-256 of a template's text.
std::string hash(std::string_view text);

}  // namespace slidelm::prompts
