#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace slidelm {

/// Word-level vocabulary. Ids 0..5 are reserved for the special tokens; plain
/// text never tokenizes to them (a literal "<eos>" in text becomes UNK).
class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kImgStart = 4;
  static constexpr std::size_t kImgEnd = 5;
  static constexpr std::size_t kSpecialCount = 6;

  /// Specials only.
  Vocab();

  /// Specials followed by every whitespace-separated word of `texts` seen at
  /// least `min_count` times, most frequent first, ties alphabetical.
  static Vocab build(const std::vector<std::string>& texts, std::size_t min_count = 1);

  /// One token per line, id = zero-based line number; the first six lines must
  /// be the specials in id order. Throws LoadError otherwise or on duplicates.
  static Vocab load(const std::string& path);
  /// Same validation as `load`, over an in-memory token list.
  static Vocab from_tokens(const std::vector<std::string>& tokens);
  void save(const std::string& path) const;

  /// Splits on whitespace; words absent from the vocab map to UNK.
  std::vector<std::size_t> tokenize(std::string_view text) const;
  /// Joins tokens with single spaces. Specials other than UNK are skipped.
  std::string detokenize(const std::vector<std::size_t>& ids) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(std::size_t id) const;
  bool contains(std::string_view word) const;
  static bool is_special(std::size_t id) noexcept { return id < kSpecialCount; }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  void add(const std::string& tok);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace slidelm
