#pragma once

#include <optional>
#include <string>
#include <vector>

namespace slidelm {

/// Per-slide file index, persisted as `key = value` lines.
struct SlideManifest {
  std::string slide_id;
  std::string raster_path;
  std::string grid_path;
  std::optional<std::string> embeddings_path;
  std::vector<std::string> record_ids;
};

void write_manifest(const std::string& path, const SlideManifest& m);
/// Relative paths resolve against the manifest's directory. Throws LoadError
/// when a referenced file is missing or a required key is absent.
SlideManifest read_manifest(const std::string& path);
/// Throws UsageError when two manifests share a slide id.
void check_unique_slide_ids(const std::vector<SlideManifest>& manifests);

}  // namespace slidelm
