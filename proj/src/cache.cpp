#include "slidelm/curation/cache.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm {

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  if (!in) return;  // first run
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      entries_.emplace(j.at("key").get<std::string>(), j.at("reply").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path_ + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string ResponseCache::key(const std::string& template_hash, const std::string& input_hash,
                               const std::string& model) {
  return sha256_hex(template_hash + "\n" + input_hash + "\n" + model);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lk(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& reply) {
  std::lock_guard lk(mu_);
  if (!entries_.emplace(key, reply).second) return;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw LoadError("cannot append to cache '" + path_ + "'");
  out << nlohmann::json{{"key", key}, {"reply", reply}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
  std::lock_guard lk(mu_);
  return entries_.size();
}

}  // namespace slidelm
