#include "slidelm/lm/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

const std::vector<std::string>& special_strings() {
  static const std::vector<std::string> s{"<pad>", "<unk>", "<bos>", "<eos>", "<img>", "</img>"};
  return s;
}

template <typename F>
void for_each_word(std::string_view text, F&& f) {
  std::size_t i = 0;
  const auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t b = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > b) f(text.substr(b, i - b));
  }
}

}  // namespace

Vocab::Vocab() {
  for (const auto& s : special_strings()) add(s);
}

void Vocab::add(const std::string& tok) {
  if (!ids_.emplace(tok, tokens_.size()).second) throw LoadError("duplicate vocab token '" + tok + "'");
  tokens_.push_back(tok);
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) for_each_word(t, [&](std::string_view w) { ++counts[std::string(w)]; });
  std::vector<std::pair<std::string, std::size_t>> words;
  for (auto& [w, c] : counts) {
    const auto& sp = special_strings();
    if (c >= min_count && std::find(sp.begin(), sp.end(), w) == sp.end()) words.emplace_back(w, c);
  }
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [w, c] : words) v.add(w);
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& lines) {
  const auto& sp = special_strings();
  if (lines.size() < sp.size() || !std::equal(sp.begin(), sp.end(), lines.begin()))
    throw LoadError("vocab must start with the special tokens " + sp.front() + " ... " + sp.back());
  Vocab v;
  for (std::size_t i = sp.size(); i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i].find_first_of(" \t") != std::string::npos)
      throw LoadError("vocab line " + std::to_string(i + 1) + ": empty or whitespace-containing token");
    v.add(lines[i]);
  }
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open vocab file " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  try {
    return from_tokens(lines);
  } catch (const LoadError& e) {
    throw LoadError(path + ": " + e.what());
  }
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path + " for writing");
  for (const auto& t : tokens_) f << t << '\n';
}

std::vector<std::size_t> Vocab::tokenize(std::string_view text) const {
  std::vector<std::size_t> out;
  for_each_word(text, [&](std::string_view w) {
    const auto it = ids_.find(std::string(w));
    out.push_back(it == ids_.end() || is_special(it->second) ? kUnk : it->second);
  });
  return out;
}

std::string Vocab::detokenize(const std::vector<std::size_t>& ids) const {
  std::string out;
  for (std::size_t id : ids) {
    if (is_special(id) && id != kUnk) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size()) throw UsageError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

bool Vocab::contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

}  // namespace slidelm
