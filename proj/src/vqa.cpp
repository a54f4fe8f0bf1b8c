#include "slidelm/evaluation/vqa.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"
#include "slidelm/evaluation/taxonomy.hpp"
#include "slidelm/rng.hpp"

namespace slidelm {

namespace {

std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_period(std::string s) {
  while (!s.empty() && s.back() == '.') s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::optional<char> letter_at(char c, std::size_t n_options) {
  char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u < 'A' || u > 'Z') return std::nullopt;
  if (static_cast<std::size_t>(u - 'A') >= n_options) return std::nullopt;
  return u;
}

std::string key(const std::string& broad, const std::string& narrow) { return broad + "/" + narrow; }

}  // namespace

std::optional<char> extract_choice(const std::string& reply, const std::vector<std::string>& options) {
  if (options.empty()) throw UsageError("extract_choice: no options");
  std::size_t b = 0;
  while (b < reply.size() && std::isspace(static_cast<unsigned char>(reply[b]))) ++b;
  std::string_view r(reply);
  r.remove_prefix(b);

  if (r.size() >= 3 && r[0] == '(' && r[2] == ')') {
    if (auto l = letter_at(r[1], options.size())) return l;
  }
  if (!r.empty() && std::isupper(static_cast<unsigned char>(r[0]))) {
    if (auto l = letter_at(r[0], options.size())) {
      if (r.size() == 1) return l;
      char next = r[1];
      if (next == '.' || next == ')' || next == ':' || next == ',') return l;
      if (std::isspace(static_cast<unsigned char>(next)) && lower_trim(r).size() == 1) return l;
    }
  }

  const std::string norm = strip_period(lower_trim(reply));
  for (std::size_t i = 0; i < options.size(); ++i)
    if (strip_period(lower_trim(options[i])) == norm) return static_cast<char>('A' + i);

  const std::string low = lower_trim(reply);
  std::optional<char> found;
  for (std::size_t i = 0; i < options.size(); ++i) {
    std::string opt = strip_period(lower_trim(options[i]));
    if (opt.empty() || low.find(opt) == std::string::npos) continue;
    if (found) return std::nullopt;
    found = static_cast<char>('A' + i);
  }
  return found;
}

CategoryReport vqa_eval(const std::vector<QARecord>& records,
                        const std::map<std::string, std::optional<char>>& predictions) {
  std::map<std::string, const QARecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  for (const auto& [id, _] : predictions)
    if (!by_id.count(id)) throw UsageError("vqa_eval: prediction for unknown record id '" + id + "'");

  CategoryReport rep;
  for (const auto& r : records) {
    if (r.type != QuestionType::multi_choice) continue;
    auto it = predictions.find(r.id);
    bool ok = it != predictions.end() && it->second && *it->second == r.answer;
    for (Tally* t : {&rep.narrow[key(r.broad, r.narrow)], &rep.broad[r.broad], &rep.overall}) {
      ++t->total;
      if (ok) ++t->correct;
    }
  }
  return rep;
}

std::map<std::string, std::optional<char>> random_predictions(const std::vector<QARecord>& records,
                                                              std::uint64_t seed) {
  Rng root(seed);
  std::map<std::string, std::optional<char>> out;
  for (const auto& r : records) {
    if (r.type != QuestionType::multi_choice || r.options.empty()) continue;
    Rng g = root.split(r.id);
    out[r.id] = static_cast<char>('A' + g.below(r.options.size()));
  }
  return out;
}

QARecord record_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("benchmark record: ") + e.what());
  }
  QARecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.slide_id = j.at("slide_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.broad = j.at("broad").get<std::string>();
    r.narrow = j.at("narrow").get<std::string>();
    std::string type = j.value("type", std::string("multi-choice"));
    if (type == "multi-choice") {
      r.type = QuestionType::multi_choice;
    } else if (type == "short-answer") {
      r.type = QuestionType::short_answer;
    } else {
      throw LoadError("benchmark record '" + r.id + "': unknown type '" + type + "'");
    }
    if (j.contains("options")) r.options = j.at("options").get<std::vector<std::string>>();
    std::string ans = j.at("answer").get<std::string>();
    if (r.type == QuestionType::multi_choice) {
      if (r.options.empty() || r.options.size() > 26)
        throw LoadError("benchmark record '" + r.id + "': multi-choice needs 1..26 options");
      if (ans.size() != 1 || ans[0] < 'A' || static_cast<std::size_t>(ans[0] - 'A') >= r.options.size())
        throw LoadError("benchmark record '" + r.id + "': answer '" + ans + "' is not an option letter");
      r.answer = ans[0];
    } else {
      r.answer_text = ans;
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("benchmark record: ") + e.what());
  }
  if (!valid_category(r.broad, r.narrow))
    throw LoadError("benchmark record '" + r.id + "': unknown category '" + r.broad + "/" + r.narrow + "'");
  return r;
}

std::string record_to_json_line(const QARecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["slide_id"] = r.slide_id;
  j["question"] = r.question;
  j["options"] = r.options;
  j["answer"] = r.type == QuestionType::multi_choice ? std::string(1, r.answer) : r.answer_text;
  j["type"] = r.type == QuestionType::multi_choice ? "multi-choice" : "short-answer";
  j["broad"] = r.broad;
  j["narrow"] = r.narrow;
  return j.dump();
}

std::vector<QARecord> read_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open benchmark '" + path + "'");
  std::vector<QARecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const LoadError& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_benchmark(const std::string& path, const std::vector<QARecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

std::string pct(const Tally& t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * t.accuracy());
  return buf;
}

}  // namespace

void write_vqa_results(const std::string& path, const std::vector<QARecord>& records,
                       const std::map<std::string, std::optional<char>>& predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "id,slide_id,broad,narrow,answer,prediction,correct\n";
  for (const auto& r : records) {
    if (r.type != QuestionType::multi_choice) continue;
    auto it = predictions.find(r.id);
    std::string pred = it != predictions.end() && it->second ? std::string(1, *it->second) : "";
    bool ok = !pred.empty() && pred[0] == r.answer;
    out << csv_field(r.id) << ',' << csv_field(r.slide_id) << ',' << csv_field(r.broad) << ','
        << csv_field(r.narrow) << ',' << r.answer << ',' << pred << ',' << (ok ? 1 : 0) << '\n';
  }
}

void write_vqa_summary(const std::string& path, const CategoryReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << "scope,name,correct,total,accuracy\n";
  for (const auto& [k, t] : report.narrow)
    out << "narrow," << csv_field(k) << ',' << t.correct << ',' << t.total << ',' << pct(t) << '\n';
  for (const auto& [k, t] : report.broad)
    out << "broad," << csv_field(k) << ',' << t.correct << ',' << t.total << ',' << pct(t) << '\n';
  out << "overall,Overall," << report.overall.correct << ',' << report.overall.total << ',' << pct(report.overall)
      << '\n';
}

std::string format_report(const CategoryReport& report) {
  std::vector<std::string> cols;
  for (auto b : broad_categories()) cols.emplace_back(b);
  for (const auto& [k, _] : report.broad)
    if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  std::ostringstream os;
  for (const auto& c : cols) os << c << '\t';
  os << "Overall\n";
  for (const auto& c : cols) {
    auto it = report.broad.find(c);
    os << (it == report.broad.end() ? std::string("-") : pct(it->second)) << '\t';
  }
  os << pct(report.overall) << '\n';
  return os.str();
}

}  // namespace slidelm
