#include "slidelm/evaluation/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>

#include "slidelm/error.hpp"

namespace slidelm {

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  Counts c;
  if (toks.size() < n) return c;
  for (std::size_t i = 0; i + n <= toks.size(); ++i)
    ++c[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                 toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return c;
}

}  // namespace

double bleu(std::string_view candidate, const std::vector<std::string>& references, int n) {
  if (n < 1 || n > 4) throw UsageError("bleu: n must be in 1..4");
  if (references.empty()) throw UsageError("bleu: no references");
  auto cand = metric_tokens(candidate);
  if (cand.empty()) return 0.0;
  std::vector<std::vector<std::string>> refs;
  refs.reserve(references.size());
  for (const auto& r : references) refs.push_back(metric_tokens(r));

  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    auto cc = ngram_counts(cand, static_cast<std::size_t>(k));
    std::size_t total = 0, clipped = 0;
    for (const auto& [g, c] : cc) {
      total += c;
      std::size_t max_ref = 0;
      for (const auto& r : refs) {
        auto rc = ngram_counts(r, static_cast<std::size_t>(k));
        auto it = rc.find(g);
        if (it != rc.end()) max_ref = std::max(max_ref, it->second);
      }
      clipped += std::min(c, max_ref);
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }

  const double c = static_cast<double>(cand.size());
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    auto d = [&](std::size_t len) { return std::abs(static_cast<double>(len) - c); };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  const double r = static_cast<double>(best);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  auto c = metric_tokens(candidate);
  auto r = metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  const auto l = static_cast<double>(lcs_length(c, r));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(c.size());
  const double rec = l / static_cast<double>(r.size());
  return 2.0 * p * rec / (p + rec);
}

CaptionScores caption_scores(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  if (candidates.size() != references.size()) throw UsageError("caption_scores: list sizes differ");
  CaptionScores s;
  s.count = candidates.size();
  if (s.count == 0) return s;
  for (std::size_t i = 0; i < s.count; ++i) {
    for (int n = 1; n <= 4; ++n) s.bleu[n - 1] += bleu(candidates[i], {references[i]}, n);
    s.rouge_l += rouge_l(candidates[i], references[i]);
  }
  for (double& b : s.bleu) b /= static_cast<double>(s.count);
  s.rouge_l /= static_cast<double>(s.count);
  return s;
}

}  // namespace slidelm
