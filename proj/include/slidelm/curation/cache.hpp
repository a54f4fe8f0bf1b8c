#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace slidelm {

/// Append-only JSONL store of model replies keyed by
/// sha256(template hash, input hash, model). Loads existing entries on
/// construction; all writes are serialised through one lock. An empty path
/// keeps the cache in memory only.
class ResponseCache {
 public:
  explicit ResponseCache(std::string path = {});

  static std::string key(const std::string& template_hash, const std::string& input_hash, const std::string& model);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& reply);
  std::size_t size() const;

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
  mutable std::mutex mu_;
};

}  // namespace slidelm
