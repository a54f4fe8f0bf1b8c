#pragma once

#include <set>
#include <string>
#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"

namespace slidelm {

/// Strict reader over one JSON object. Every key must be consumed through
/// `read`/`object`/`has`; `finish` rejects leftovers with a ConfigError naming
/// the full key path.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  /// Leaves `out` untouched when the key is absent.
  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(key_path(key), "wrong type");
    }
  }

  const nlohmann::json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  ConfigReader object(const std::string& key) {
    seen_.insert(key);
    return ConfigReader(j_.at(key), key_path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace slidelm
