#include "slidelm/slide_io/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "slidelm/error.hpp"

namespace slidelm {
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_manifest(const std::string& path, const SlideManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write manifest '" + path + "'");
  out << "slide_id = " << m.slide_id << "\n";
  out << "raster = " << m.raster_path << "\n";
  out << "grid = " << m.grid_path << "\n";
  if (m.embeddings_path) out << "embeddings = " << *m.embeddings_path << "\n";
  out << "records = ";
  for (std::size_t i = 0; i < m.record_ids.size(); ++i) out << (i ? "," : "") << m.record_ids[i];
  out << "\n";
}

SlideManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError(path + ": expected 'key = value', got '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  auto require = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) throw LoadError(path + ": missing key '" + key + "'");
    return it->second;
  };
  SlideManifest m;
  m.slide_id = require("slide_id");
  m.raster_path = resolve(require("raster"));
  m.grid_path = resolve(require("grid"));
  if (auto it = kv.find("embeddings"); it != kv.end() && !it->second.empty()) m.embeddings_path = resolve(it->second);
  if (auto it = kv.find("records"); it != kv.end()) {
    std::string rest = it->second;
    std::size_t pos = 0;
    while (pos <= rest.size() && !rest.empty()) {
      auto comma = rest.find(',', pos);
      if (comma == std::string::npos) comma = rest.size();
      auto id = trim(rest.substr(pos, comma - pos));
      if (!id.empty()) m.record_ids.push_back(id);
      pos = comma + 1;
    }
  }
  for (const auto* p : {&m.raster_path, &m.grid_path})
    if (!fs::exists(*p)) throw LoadError(path + ": referenced file '" + *p + "' does not exist");
  if (m.embeddings_path && !fs::exists(*m.embeddings_path))
    throw LoadError(path + ": referenced file '" + *m.embeddings_path + "' does not exist");
  return m;
}

void check_unique_slide_ids(const std::vector<SlideManifest>& manifests) {
  std::set<std::string> seen;
  for (const auto& m : manifests)
    if (!seen.insert(m.slide_id).second) throw UsageError("duplicate slide id '" + m.slide_id + "'");
}

}  // namespace slidelm
