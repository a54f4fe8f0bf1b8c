#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace slidelm {

/// Metric tokenization: ASCII lowercase, every punctuation character replaced
/// by a space, then split on whitespace.
std::vector<std::string> metric_tokens(std::string_view text);

/// Sentence BLEU-n (n in 1..4): clipped n-gram precisions against all
/// references, geometric mean over orders 1..n, brevity penalty against the
/// reference length closest to the candidate (shorter wins ties). No
/// smoothing: any zero precision gives 0. Empty candidate gives 0.
/// Throws UsageError for n outside 1..4 or no references.
double bleu(std::string_view candidate, const std::vector<std::string>& references, int n);

/// ROUGE-L F-measure 2PR/(P+R) from the token LCS; 0 when either side is empty.
double rouge_l(std::string_view candidate, std::string_view reference);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct CaptionScores {
  double bleu[4] = {0, 0, 0, 0};
  double rouge_l = 0.0;
  std::size_t count = 0;
};

/// Mean sentence-level scores over aligned candidate/reference lists.
CaptionScores caption_scores(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

}  // namespace slidelm
