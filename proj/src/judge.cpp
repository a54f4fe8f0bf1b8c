#include "slidelm/evaluation/judge.hpp"

#include <atomic>
#include <cctype>
#include <regex>
#include <thread>

#include "slidelm/error.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm {

const char* const kJudgePromptTemplate =
    "You grade pathology slide captions.\n"
    "Compare the candidate caption with the reference caption written by a pathologist.\n"
    "Rate how well the candidate conveys the same findings, with 1 meaning unrelated or contradictory "
    "and 10 meaning equivalent in clinical content.\n"
    "Reply with the line \"Score: N/10\" and nothing else.\n\n"
    "Reference caption:\n{reference}\n\n"
    "Candidate caption:\n{candidate}\n";

std::string judge_prompt_hash() { return sha256_hex(kJudgePromptTemplate); }

namespace {

std::optional<int> in_range(const std::string& digits) {
  if (digits.size() > 3) return std::nullopt;
  int v = std::stoi(digits);
  if (v < 1 || v > 10) return std::nullopt;
  return v;
}

std::string substitute(std::string t, const std::string& name, const std::string& value) {
  const std::string tag = "{" + name + "}";
  for (auto p = t.find(tag); p != std::string::npos; p = t.find(tag, p + value.size()))
    t.replace(p, tag.size(), value);
  return t;
}

}  // namespace

std::optional<int> parse_judge_score(const std::string& reply) {
  static const std::regex out_of_ten(R"((\d+)\s*/\s*10\b)");
  static const std::regex labelled(R"(score\s*[:=]\s*(\d+))", std::regex::icase);
  static const std::regex bare(R"(^\s*(\d+)\s*\.?\s*$)");
  std::smatch m;
  if (std::regex_search(reply, m, out_of_ten)) return in_range(m[1].str());
  if (std::regex_search(reply, m, labelled)) return in_range(m[1].str());
  if (std::regex_match(reply, m, bare)) return in_range(m[1].str());
  return std::nullopt;
}

std::optional<int> judge_caption(const std::string& candidate, const std::string& reference, ChatClient& client,
                                 const JudgeConfig& cfg) {
  ChatRequest req;
  req.model = cfg.model;
  req.temperature = cfg.temperature;
  std::string prompt = substitute(substitute(kJudgePromptTemplate, "reference", reference), "candidate", candidate);
  req.messages.push_back({"user", std::move(prompt)});
  for (std::size_t a = 0; a < cfg.attempts; ++a) {
    try {
      if (auto s = parse_judge_score(client.complete(req))) return s;
    } catch (const ChatError&) {
    }
  }
  return std::nullopt;
}

JudgeSummary judge_captions(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                            ChatClient& client, const JudgeConfig& cfg, std::size_t jobs) {
  if (candidates.size() != references.size()) throw UsageError("judge_captions: list sizes differ");
  JudgeSummary s;
  s.scores.resize(candidates.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < candidates.size();)
      s.scores[i] = judge_caption(candidates[i], references[i], client, cfg);
  };
  std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, candidates.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : s.scores) {
    if (v) {
      sum += *v;
      ++n;
    } else {
      ++s.missing;
    }
  }
  s.mean = n ? sum / static_cast<double>(n) : 0.0;
  return s;
}

}  // namespace slidelm
