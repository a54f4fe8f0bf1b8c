#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slidelm/curation/chat_client.hpp"
#include "slidelm/lm/generate.hpp"
#include "slidelm/model/model.hpp"
#include "slidelm/slide_io/tiling.hpp"
#include "slidelm/training/trainer.hpp"

namespace slidelm::cli {

/// Everything a `slidelm` invocation can be configured with. Loaded from one
/// JSON file; every key is optional and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  struct Paths {
    std::string data_root;           // relative input paths resolve against this when set
    std::string checkpoints;         // default output directory of `train`
    std::string outputs = "runs";    // default parent of per-command output directories
  } paths;

  std::optional<std::size_t> tile_patch_size;  // defaults to model.patch_encoder.patch_size
  TissueFilterConfig tissue;

  nlohmann::json model_json = nlohmann::json::object();
  ModelConfig model;

  StageConfig stage1 = StageConfig::defaults(1);
  StageConfig stage2 = StageConfig::defaults(2);

  GenerationConfig generation;

  struct Chat {
    HttpChatConfig http;
    std::string model = "gpt-4o";
    double temperature = 0.0;
    std::vector<std::string> filter_models{"gpt-4", "internlm2-chat-7b", "qwen-7b-chat", "deepseek-7b-chat"};
    std::string replay;  // replay file; when set no network calls are made
  } chat;

  std::size_t curation_retries = 3;
  std::size_t saliency_k = 5;
  std::size_t thumbnail_size = 1024;

  std::size_t patch_size() const { return tile_patch_size.value_or(model.patch.patch_size); }

  /// Throws ConfigError naming the offending key path.
  static RunConfig from_json(const nlohmann::json& j);
  /// Throws LoadError when the file is missing or not JSON.
  static RunConfig load(const std::string& path);
};

}  // namespace slidelm::cli
