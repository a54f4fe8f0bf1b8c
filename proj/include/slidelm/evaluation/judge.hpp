#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slidelm/curation/chat_client.hpp"

namespace slidelm {

/// Pinned judge prompt; {reference} and {candidate} are substituted.
extern const char* const kJudgePromptTemplate;
inline constexpr const char* kJudgePromptVersion = "judge-v1";
/// SHA-256 of the template text, recorded with judge results.
std::string judge_prompt_hash();

/// Score extraction, first rule wins: "N/10" or "N / 10"; "score: N" or
/// "score = N" (case-insensitive); a reply that is only an integer. Scores
/// outside 1..10 count as unparseable.
std::optional<int> parse_judge_score(const std::string& reply);

struct JudgeConfig {
  std::string model = "gpt-4o";
  std::size_t attempts = 3;
  double temperature = 0.0;
};

/// Asks the judge up to `attempts` times; returns none when every reply is
/// unparseable or the client fails.
std::optional<int> judge_caption(const std::string& candidate, const std::string& reference, ChatClient& client,
                                 const JudgeConfig& cfg = {});

struct JudgeSummary {
  std::vector<std::optional<int>> scores;
  double mean = 0.0;  // over non-missing scores
  std::size_t missing = 0;
};

/// Judges every pair with at most `jobs` concurrent requests; scores are
/// returned in input order.
JudgeSummary judge_captions(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                            ChatClient& client, const JudgeConfig& cfg = {}, std::size_t jobs = 4);

}  // namespace slidelm
