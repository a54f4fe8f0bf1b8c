#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace slidelm {

enum class QuestionType { multi_choice, short_answer };

struct QARecord {
  std::string id;
  std::string slide_id;
  std::string question;
  std::vector<std::string> options;  // option i has letter 'A' + i
  char answer = 'A';
  QuestionType type = QuestionType::multi_choice;
  std::string broad;
  std::string narrow;
  std::string answer_text;  // short-answer reference
};

/// Maps a free-form reply to an option letter. First matching rule wins:
///  1. leading letter naming an existing option: "(B)" followed by anything,
///     or "B" followed by end of reply or one of . ) : , ("B. text" matches,
///     "A tumor" does not);
///  2. reply equal to one option's text (case-insensitive, trimmed, trailing
///     period ignored);
///  3. exactly one option's text contained in the reply (case-insensitive).
/// Otherwise none.
std::optional<char> extract_choice(const std::string& reply, const std::vector<std::string>& options);

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct CategoryReport {
  std::map<std::string, Tally> narrow;  // keyed "broad/narrow"
  std::map<std::string, Tally> broad;
  Tally overall;
};

/// Predictions keyed by record id; a missing or empty prediction scores
/// incorrect. Throws UsageError for prediction ids absent from `records`.
CategoryReport vqa_eval(const std::vector<QARecord>& records,
                        const std::map<std::string, std::optional<char>>& predictions);

/// Uniform random letter per record over its options, seeded per record id.
std::map<std::string, std::optional<char>> random_predictions(const std::vector<QARecord>& records,
                                                              std::uint64_t seed);

/// Line-delimited JSON: id, slide_id, question, options, answer, type
/// ("multi-choice" | "short-answer"), broad, narrow. Throws LoadError on
/// malformed lines, unknown categories or an answer outside the options.
std::vector<QARecord> read_benchmark(const std::string& path);
void write_benchmark(const std::string& path, const std::vector<QARecord>& records);
QARecord record_from_json_line(const std::string& line);
std::string record_to_json_line(const QARecord& r);

/// Per-record CSV: id,slide_id,broad,narrow,answer,prediction,correct.
void write_vqa_results(const std::string& path, const std::vector<QARecord>& records,
                       const std::map<std::string, std::optional<char>>& predictions);
/// Summary CSV: scope,name,correct,total,accuracy (accuracy in percent).
void write_vqa_summary(const std::string& path, const CategoryReport& report);
/// Human-readable table with Microscopy / Diagnosis / Clinical / Overall columns.
std::string format_report(const CategoryReport& report);

}  // namespace slidelm
