#include "slidelm/curation/curation.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "slidelm/curation/prompts.hpp"
#include "slidelm/error.hpp"
#include "slidelm/evaluation/baselines.hpp"
#include "slidelm/evaluation/taxonomy.hpp"
#include "slidelm/rng.hpp"
#include "slidelm/training/synthetic_corpus.hpp"
#include "slidelm/util/hash.hpp"
#include "slidelm/util/parallel.hpp"

namespace slidelm {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

StageOutput call_model(const std::string& template_hash, std::vector<ChatMessage> messages, const ModelHandle& m,
                       const CallOptions& opt) {
  if (!m.client) throw UsageError("model handle has no client");
  ChatRequest req{m.model, std::move(messages), opt.temperature};
  StageOutput out;
  out.prompt_hash = template_hash;
  const std::string key = ResponseCache::key(template_hash, request_hash(req), m.model);
  if (opt.cache)
    if (auto hit = opt.cache->get(key)) {
      out.text = *hit;
      return out;
    }
  for (std::size_t attempt = 0; attempt <= opt.retries; ++attempt) {
    try {
      out.text = m.client->complete(req);
      out.failed = false;
      if (opt.cache) opt.cache->put(key, out.text);
      return out;
    } catch (const ChatError& e) {
      out.failed = true;
      out.error = e.what();
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Fetches a string field under "a b" or "a_b" spelling.
std::optional<std::string> field(const json& j, const std::string& spaced) {
  std::string under = spaced;
  std::replace(under.begin(), under.end(), ' ', '_');
  for (const auto& k : {spaced, under}) {
    auto it = j.find(k);
    if (it != j.end() && it->is_string()) return trim(it->get<std::string>());
  }
  return std::nullopt;
}

// "A. text" -> "text" when the prefix letter matches the position.
std::string strip_option_prefix(const std::string& opt, std::size_t index) {
  if (opt.size() >= 3 && opt[0] == static_cast<char>('A' + index) && (opt[1] == '.' || opt[1] == ')' || opt[1] == ':') &&
      opt[2] == ' ')
    return trim(opt.substr(3));
  return opt;
}

}  // namespace

std::vector<ReportRecord> read_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open reports '" + path + "'");
  std::vector<ReportRecord> out;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    ReportRecord r;
    try {
      auto j = json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.patient_id = j.value("patient_id", std::string());
      r.text = j.at("text").get<std::string>();
      r.slide_ids = j.at("slide_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (r.slide_ids.empty()) throw LoadError(path + ":" + std::to_string(lineno) + ": report has no slides");
    if (!ids.insert(r.id).second) throw LoadError(path + ":" + std::to_string(lineno) + ": duplicate id " + r.id);
    out.push_back(std::move(r));
  }
  return out;
}

StageOutput clean_report(const ReportRecord& report, const ModelHandle& m, const CallOptions& opt) {
  if (trim(report.text).empty()) throw UsageError("clean_report: report '" + report.id + "' is empty");
  std::string content = std::string(prompts::kReportClean) + "\n\n" + report.text;
  return call_model(prompts::hash(prompts::kReportClean), {{"user", std::move(content)}}, m, opt);
}

std::string collapse_paragraphs(const std::string& text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

StageOutput gen_caption(const std::string& cleaned, const ModelHandle& m, const CallOptions& opt) {
  if (trim(cleaned).empty()) throw UsageError("gen_caption: empty report");
  std::string content = cleaned + "\n\n" + std::string(prompts::kCaptionGeneration);
  auto out = call_model(prompts::hash(prompts::kCaptionGeneration), {{"user", std::move(content)}}, m, opt);
  if (!out.failed) out.text = collapse_paragraphs(out.text);
  return out;
}

std::vector<std::string> split_json_items(const std::string& reply) {
  std::string body = reply;
  if (auto f = body.find("```"); f != std::string::npos) {
    auto start = body.find('\n', f);
    auto end = start == std::string::npos ? std::string::npos : body.find("```", start);
    if (end != std::string::npos) body = body.substr(start + 1, end - start - 1);
  }
  std::vector<std::string> items;
  auto from_value = [&](const json& v) {
    if (v.is_array()) {
      for (const auto& e : v) items.push_back(e.dump());
      return true;
    }
    if (v.is_object()) {
      if (v.contains("question")) {
        items.push_back(v.dump());
        return true;
      }
      for (const auto& [_, member] : v.items())
        if (member.is_array()) {
          for (const auto& e : member) items.push_back(e.dump());
          return true;
        }
    }
    return false;
  };
  try {
    if (from_value(json::parse(body))) return items;
    return {body};
  } catch (const json::exception&) {
  }
  // Run of top-level objects, possibly separated by prose or commas.
  int depth = 0;
  bool in_str = false, esc = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (in_str) {
      if (esc) esc = false;
      else if (c == '\\') esc = true;
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"' && depth > 0) in_str = true;
    else if (c == '{' && depth++ == 0) start = i;
    else if (c == '}' && depth > 0 && --depth == 0) items.push_back(body.substr(start, i - start + 1));
  }
  if (items.empty() && !trim(body).empty()) items.push_back(body);
  return items;
}

GenQaResult gen_qas(const std::string& cleaned, const std::string& broad, const std::string& report_id,
                    const std::string& slide_id, const ModelHandle& m, const CallOptions& opt) {
  if (prompts::broad_scope(broad).empty()) throw UsageError("gen_qas: unknown broad category '" + broad + "'");
  if (trim(cleaned).empty()) throw UsageError("gen_qas: empty report");
  const std::string objective = prompts::objective(broad);
  const std::string hash =
      prompts::hash(std::string(prompts::kSystem) + "\n" + objective + "\n" + std::string(prompts::kGeneral));
  std::string content = cleaned + "\n\n" + objective + "\n\n" + std::string(prompts::kGeneral);
  auto reply = call_model(hash, {{"system", std::string(prompts::kSystem)}, {"user", std::move(content)}}, m, opt);

  GenQaResult res;
  if (reply.failed) {
    res.failed = true;
    res.error = reply.error;
    return res;
  }
  std::size_t n = 0;
  for (const auto& raw : split_json_items(reply.text)) {
    const std::string where = "item " + std::to_string(n + res.dropped.size() + 1) + ": ";
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::exception&) {
      res.dropped.push_back(where + "unparseable JSON");
      continue;
    }
    if (!j.is_object()) {
      res.dropped.push_back(where + "not an object");
      continue;
    }
    auto narrow = field(j, "narrow category");
    auto item_broad = field(j, "broad category");
    auto question = field(j, "question");
    auto type = field(j, "question type");
    if (!narrow || narrow->empty()) {
      res.dropped.push_back(where + "missing narrow category");
      continue;
    }
    if (!item_broad || item_broad->empty()) {
      res.dropped.push_back(where + "missing broad category");
      continue;
    }
    if (lower(*item_broad) != lower(broad)) {
      res.dropped.push_back(where + "broad category '" + *item_broad + "' differs from requested '" + broad + "'");
      continue;
    }
    if (!valid_category(broad, *narrow)) {
      res.dropped.push_back(where + "unknown narrow category '" + *narrow + "'");
      continue;
    }
    if (!question || question->empty()) {
      res.dropped.push_back(where + "missing question");
      continue;
    }
    if (!type) {
      res.dropped.push_back(where + "missing question type");
      continue;
    }
    QACandidate c;
    c.record.slide_id = slide_id;
    c.record.question = *question;
    c.record.broad = broad;
    c.record.narrow = *narrow;
    c.reasoning = field(j, "reasoning").value_or("");
    c.source_report = report_id;
    c.prompt_hash = hash;
    std::string answer;
    if (auto a = j.find("answer"); a != j.end()) answer = a->is_string() ? trim(a->get<std::string>()) : a->dump();
    if (answer.empty()) {
      res.dropped.push_back(where + "missing answer");
      continue;
    }
    const std::string t = lower(*type);
    if (t.find("multi") != std::string::npos) {
      auto opts = j.find("options");
      if (opts == j.end() || !opts->is_array() || opts->size() != 4 ||
          !std::all_of(opts->begin(), opts->end(), [](const json& o) { return o.is_string(); })) {
        res.dropped.push_back(where + "multi-choice item needs exactly four string options");
        continue;
      }
      for (std::size_t i = 0; i < 4; ++i) c.record.options.push_back(strip_option_prefix(trim((*opts)[i].get<std::string>()), i));
      auto letter = extract_choice(answer, c.record.options);
      if (!letter) {
        res.dropped.push_back(where + "answer '" + answer + "' matches no option");
        continue;
      }
      c.record.type = QuestionType::multi_choice;
      c.record.answer = *letter;
    } else if (t.find("short") != std::string::npos) {
      c.record.type = QuestionType::short_answer;
      c.record.answer_text = answer;
    } else {
      res.dropped.push_back(where + "unknown question type '" + *type + "'");
      continue;
    }
    c.record.id = report_id + "/" + broad + "/" + std::to_string(n++);
    res.candidates.push_back(std::move(c));
  }
  return res;
}

FilterVerdict ensemble_filter(const QACandidate& qa, const std::vector<ModelHandle>& models, const CallOptions& opt) {
  if (models.size() != kFilterModels) throw UsageError("ensemble_filter: exactly four models are required");
  if (qa.record.type != QuestionType::multi_choice) throw UsageError("ensemble_filter: candidate is not multi-choice");
  const std::string prompt = text_only_prompt(qa.record.question, qa.record.options);
  static const std::string kFilterTemplate = prompts::hash("text-only-filter-v1");
  FilterVerdict v;
  std::size_t n_correct = 0;
  for (std::size_t i = 0; i < kFilterModels; ++i) {
    auto reply = call_model(kFilterTemplate, {{"user", prompt}}, models[i], opt);
    v.failed[i] = reply.failed;
    v.correct[i] = !reply.failed && extract_choice(reply.text, qa.record.options) == qa.record.answer;
    n_correct += v.correct[i];
  }
  v.kept = n_correct < kFilterExcludeAt;
  v.reason = std::string(v.kept ? "kept" : "excluded") + ": " + std::to_string(n_correct) + "/4 text-only correct";
  if (std::any_of(v.failed.begin(), v.failed.end(), [](bool f) { return f; })) v.reason += " (model failure)";
  return v;
}

SplitResult split_assign(const std::map<std::string, std::vector<std::string>>& report_slides, std::uint64_t seed) {
  std::map<std::string, std::string> owner;
  SplitResult out;
  std::vector<std::string> single;
  for (const auto& [report, slides] : report_slides) {
    if (slides.empty()) throw UsageError("split_assign: report '" + report + "' has no slides");
    std::set<std::string> uniq(slides.begin(), slides.end());
    for (const auto& s : uniq) {
      auto [it, fresh] = owner.emplace(s, report);
      if (!fresh)
        throw UsageError("split_assign: slide '" + s + "' linked to reports '" + it->second + "' and '" + report + "'");
    }
    if (uniq.size() > 1) out.train.insert(uniq.begin(), uniq.end());
    else single.push_back(*uniq.begin());
  }
  std::sort(single.begin(), single.end());
  Rng(seed).split("split").shuffle(single);
  const std::size_t n_train = (8 * single.size() + 5) / 10;  // round(0.8 n), halves up
  for (std::size_t i = 0; i < single.size(); ++i) (i < n_train ? out.train : out.test).insert(single[i]);
  return out;
}

QARecord labels_to_vqa(const std::string& task, const std::vector<std::string>& labels, const std::string& label,
                       const std::string& slide_id) {
  if (labels.empty()) throw UsageError("labels_to_vqa: empty label set");
  if (labels.size() > 26) throw UsageError("labels_to_vqa: more than 26 labels");
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw UsageError("labels_to_vqa: label '" + label + "' not in the set for " + task);
  QARecord r;
  r.id = slide_id + "/" + task;
  r.slide_id = slide_id;
  r.question = "What is the " + task + " shown in this whole slide image?";
  r.options = labels;
  r.answer = static_cast<char>('A' + (it - labels.begin()));
  r.broad = std::string(kLabelTaskFamily);
  r.narrow = task;
  return r;
}

namespace {

TrainSample vqa_sample(const QARecord& r, const std::string& slide) {
  TrainSample s;
  s.slide_id = slide;
  s.kind = TaskKind::vqa;
  if (r.type == QuestionType::multi_choice) {
    s.prompt = text_only_prompt(r.question, r.options);
    s.target = std::string(1, r.answer) + ". " + r.options[static_cast<std::size_t>(r.answer - 'A')];
  } else {
    s.prompt = r.question;
    s.target = r.answer_text;
  }
  return s;
}

}  // namespace

CurationOutputs run_curation(std::vector<ReportRecord> reports, const ModelHandle& generator,
                             const std::vector<ModelHandle>& filter_models, const CurationOptions& opt) {
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  CurationOutputs out;
  const std::size_t n = reports.size();
  out.cleaned.resize(n);
  out.captions.resize(n);
  for (auto& r : reports) std::sort(r.slide_ids.begin(), r.slide_ids.end());

  parallel_for(n, opt.jobs, [&](std::size_t i) {
    out.cleaned[i] = clean_report(reports[i], generator, opt.call);
    if (!out.cleaned[i].failed) out.captions[i] = gen_caption(out.cleaned[i].text, generator, opt.call);
  });
  for (std::size_t i = 0; i < n; ++i) reports[i].cleaned = out.cleaned[i].failed ? "" : out.cleaned[i].text;

  auto broads = broad_categories();
  std::vector<GenQaResult> gen(n * broads.size());
  parallel_for(gen.size(), opt.jobs, [&](std::size_t k) {
    const auto& r = reports[k / broads.size()];
    if (r.cleaned.empty()) return;
    gen[k] = gen_qas(r.cleaned, std::string(broads[k % broads.size()]), r.id, r.slide_ids.front(), generator, opt.call);
  });
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const auto& r = reports[k / broads.size()];
    for (auto& c : gen[k].candidates) out.candidates.push_back(std::move(c));
    for (auto& d : gen[k].dropped) out.dropped.push_back(r.id + " " + std::string(broads[k % broads.size()]) + " " + d);
    if (gen[k].failed) out.dropped.push_back(r.id + " " + std::string(broads[k % broads.size()]) + " call failed: " + gen[k].error);
  }

  std::map<std::string, std::vector<std::string>> links;
  for (const auto& r : reports) links[r.id] = r.slide_ids;
  out.split = split_assign(links, opt.seed);

  std::vector<const QACandidate*> to_filter;
  for (const auto& c : out.candidates)
    if (c.record.type == QuestionType::multi_choice && out.split.test.count(c.record.slide_id)) to_filter.push_back(&c);
  std::vector<FilterVerdict> verdicts(to_filter.size());
  if (!to_filter.empty()) {
    parallel_for(to_filter.size(), opt.jobs,
                 [&](std::size_t i) { verdicts[i] = ensemble_filter(*to_filter[i], filter_models, opt.call); });
  }
  for (std::size_t i = 0; i < to_filter.size(); ++i) {
    out.verdicts[to_filter[i]->record.id] = verdicts[i];
    if (verdicts[i].kept) out.benchmark.push_back(to_filter[i]->record);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reports[i];
    if (!out.split.train.count(r.slide_ids.front())) continue;
    for (const auto& slide : r.slide_ids) {
      if (!out.captions[i].failed && !out.captions[i].text.empty())
        out.train_samples.push_back({slide, TaskKind::caption, std::string(kDescribePrompt), out.captions[i].text});
      for (const auto& c : out.candidates)
        if (c.source_report == r.id) out.train_samples.push_back(vqa_sample(c.record, slide));
    }
  }
  out.reports = std::move(reports);
  return out;
}

std::vector<std::string> write_curation_outputs(const std::string& dir, const CurationOutputs& out) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    written.push_back((fs::path(dir) / name).string());
    std::ofstream f(written.back(), std::ios::binary);
    if (!f) throw LoadError("cannot write '" + written.back() + "'");
    return f;
  };
  {
    auto f = open("cleaned.jsonl");
    for (std::size_t i = 0; i < out.reports.size(); ++i) {
      ojson j;
      j["report_id"] = out.reports[i].id;
      j["prompt_hash"] = out.cleaned[i].prompt_hash;
      j["failed"] = out.cleaned[i].failed;
      j["cleaned"] = out.cleaned[i].text;
      f << j.dump() << '\n';
    }
  }
  {
    auto f = open("captions.jsonl");
    for (std::size_t i = 0; i < out.reports.size(); ++i) {
      ojson j;
      j["report_id"] = out.reports[i].id;
      j["slide_ids"] = out.reports[i].slide_ids;
      j["prompt_hash"] = out.captions[i].prompt_hash;
      j["failed"] = out.cleaned[i].failed || out.captions[i].failed;
      j["caption"] = out.captions[i].text;
      f << j.dump() << '\n';
    }
  }
  {
    auto f = open("qa_candidates.jsonl");
    for (const auto& c : out.candidates) {
      auto j = ojson::parse(record_to_json_line(c.record));
      j["reasoning"] = c.reasoning;
      j["source_report"] = c.source_report;
      j["prompt_hash"] = c.prompt_hash;
      f << j.dump() << '\n';
    }
  }
  {
    auto f = open("filter_verdicts.jsonl");
    for (const auto& [id, v] : out.verdicts) {
      ojson j;
      j["id"] = id;
      j["correct"] = v.correct;
      j["failed"] = v.failed;
      j["kept"] = v.kept;
      j["reason"] = v.reason;
      f << j.dump() << '\n';
    }
  }
  {
    auto f = open("dropped.txt");
    for (const auto& d : out.dropped) f << d << '\n';
  }
  {
    auto f = open("split.json");
    ojson j;
    j["train"] = out.split.train;
    j["test"] = out.split.test;
    f << j.dump(2) << '\n';
  }
  written.push_back((fs::path(dir) / "train.jsonl").string());
  write_train_samples(written.back(), out.train_samples);
  written.push_back((fs::path(dir) / "benchmark.jsonl").string());
  write_benchmark(written.back(), out.benchmark);
  return written;
}

}  // namespace slidelm
