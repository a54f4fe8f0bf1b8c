#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slidelm/curation/cache.hpp"
#include "slidelm/curation/chat_client.hpp"
#include "slidelm/evaluation/vqa.hpp"
#include "slidelm/training/trainer.hpp"

namespace slidelm {

struct ReportRecord {
  std::string id;
  std::string patient_id;
  std::string text;
  std::vector<std::string> slide_ids;
  std::string cleaned;
};

/// Line-delimited JSON {"id", "patient_id", "text", "slide_ids"}. Throws
/// LoadError on malformed lines, duplicate ids or reports without slides.
std::vector<ReportRecord> read_reports(const std::string& path);

/// One model endpoint used by a curation stage.
struct ModelHandle {
  ChatClient* client = nullptr;
  std::string model;
};

struct CallOptions {
  std::size_t retries = 3;  // attempts after the first one fails with ChatError
  double temperature = 0.0;
  ResponseCache* cache = nullptr;
};

/// Result of one templated model call.
struct StageOutput {
  std::string text;
  std::string prompt_hash;
  bool failed = false;
  std::string error;
};

StageOutput clean_report(const ReportRecord& report, const ModelHandle& m, const CallOptions& opt = {});

/// Caption is the reply reduced to one paragraph: every run of whitespace
/// (including blank lines) becomes one space, ends trimmed.
StageOutput gen_caption(const std::string& cleaned, const ModelHandle& m, const CallOptions& opt = {});
std::string collapse_paragraphs(const std::string& text);

struct QACandidate {
  QARecord record;
  std::string reasoning;
  std::string source_report;
  std::string prompt_hash;
};

struct GenQaResult {
  std::vector<QACandidate> candidates;
  std::vector<std::string> dropped;  // one reason per rejected item
  bool failed = false;
  std::string error;
};

/// Asks for questions in one broad category and validates each returned item:
/// known narrow category inside `broad`, non-empty question and answer, and
/// for multi-choice exactly four options with an answer resolvable to a
/// letter. Record ids are "<report id>/<broad>/<n>" in reply order.
GenQaResult gen_qas(const std::string& cleaned, const std::string& broad, const std::string& report_id,
                    const std::string& slide_id, const ModelHandle& m, const CallOptions& opt = {});

/// Items parsed from a reply: a JSON array, an object wrapping one array, a
/// single object, or a run of objects, optionally inside a ``` fence.
std::vector<std::string> split_json_items(const std::string& reply);

struct FilterVerdict {
  std::array<bool, 4> correct{};
  std::array<bool, 4> failed{};
  bool kept = false;
  std::string reason;
};

inline constexpr std::size_t kFilterModels = 4;
inline constexpr std::size_t kFilterExcludeAt = 3;

/// Each model sees only the question and lettered options. A candidate is
/// kept iff fewer than three models answer it correctly; a failed call counts
/// as incorrect. Throws UsageError unless exactly four models are given or
/// when the candidate is not multi-choice.
FilterVerdict ensemble_filter(const QACandidate& qa, const std::vector<ModelHandle>& models,
                              const CallOptions& opt = {});

struct SplitResult {
  std::set<std::string> train;
  std::set<std::string> test;
};

/// Slides of multi-slide reports go to train. Single-slide reports are
/// shuffled with `seed` and round(0.8 n) of them go to train, the rest to
/// test. Throws UsageError when a slide appears in two reports or a report
/// has no slide.
SplitResult split_assign(const std::map<std::string, std::vector<std::string>>& report_slides, std::uint64_t seed);

/// Closed-set record "What is the <task> shown in this whole slide image?"
/// with options = labels in the given order. Throws UsageError when the label
/// is not in the set, the set is empty, or it has more than 26 labels.
QARecord labels_to_vqa(const std::string& task, const std::vector<std::string>& labels, const std::string& label,
                       const std::string& slide_id);

struct CurationOptions {
  CallOptions call;
  std::size_t jobs = 4;
  std::uint64_t seed = 0;
};

struct CurationOutputs {
  std::vector<ReportRecord> reports;  // sorted by id, cleaned text filled
  std::vector<StageOutput> cleaned;
  std::vector<StageOutput> captions;
  std::vector<QACandidate> candidates;
  std::vector<std::string> dropped;
  std::map<std::string, FilterVerdict> verdicts;  // test-split multi-choice candidates
  SplitResult split;
  std::vector<TrainSample> train_samples;
  std::vector<QARecord> benchmark;
};

/// Full pipeline: clean, caption, generate questions for every broad
/// category, split slides, filter test-split multi-choice candidates with the
/// four `filter_models`. Train samples cover every slide in train; the
/// benchmark holds kept test-split multi-choice records.
CurationOutputs run_curation(std::vector<ReportRecord> reports, const ModelHandle& generator,
                             const std::vector<ModelHandle>& filter_models, const CurationOptions& opt);

/// Writes cleaned.jsonl, captions.jsonl, qa_candidates.jsonl,
/// filter_verdicts.jsonl, dropped.txt, split.json, train.jsonl and benchmark.jsonl into
/// `dir`; returns the written paths.
std::vector<std::string> write_curation_outputs(const std::string& dir, const CurationOutputs& out);

}  // namespace slidelm
