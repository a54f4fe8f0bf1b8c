#include "run_config.hpp"

#include <fstream>

#include "slidelm/util/json_config.hpp"

namespace slidelm::cli {

namespace {

void read_stage(ConfigReader r, StageConfig& s) {
  r.read("epochs", s.epochs);
  r.read("lr", s.optimizer.lr);
  r.read("weight_decay", s.optimizer.weight_decay);
  r.read("beta1", s.optimizer.beta1);
  r.read("beta2", s.optimizer.beta2);
  r.read("eps", s.optimizer.eps);
  r.read("grad_accum", s.grad_accum);
  r.read("max_steps", s.max_steps);
  r.read("trainable", s.trainable);
  r.finish();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  ConfigReader r(j, "");
  r.read("seed", c.seed);
  r.read("jobs", c.jobs);
  if (c.jobs == 0) throw ConfigError("jobs", "must be >= 1");
  if (r.has("paths")) {
    auto p = r.object("paths");
    p.read("data_root", c.paths.data_root);
    p.read("checkpoints", c.paths.checkpoints);
    p.read("outputs", c.paths.outputs);
    p.finish();
  }
  if (r.has("tiling")) {
    auto t = r.object("tiling");
    if (t.has("patch_size")) {
      std::size_t ps = 0;
      t.read("patch_size", ps);
      if (ps == 0) throw ConfigError(t.key_path("patch_size"), "must be >= 1");
      c.tile_patch_size = ps;
    }
    t.read("saturation_threshold", c.tissue.saturation_threshold);
    t.read("tissue_fraction", c.tissue.tissue_fraction);
    t.finish();
  }
  if (r.has("model")) {
    c.model_json = r.at("model");
    c.model = ModelConfig::from_json(c.model_json, "model");
  }
  if (r.has("train")) {
    auto t = r.object("train");
    if (t.has("stage1")) read_stage(t.object("stage1"), c.stage1);
    if (t.has("stage2")) read_stage(t.object("stage2"), c.stage2);
    t.finish();
    c.stage1.validate("train.stage1");
    c.stage2.validate("train.stage2");
  }
  if (r.has("generation")) {
    auto g = r.object("generation");
    g.read("max_len", c.generation.max_len);
    if (c.generation.max_len == 0) throw ConfigError(g.key_path("max_len"), "must be >= 1");
    g.finish();
  }
  if (r.has("chat")) {
    auto ch = r.object("chat");
    ch.read("endpoint", c.chat.http.endpoint);
    ch.read("api_key_env", c.chat.http.api_key_env);
    if (ch.has("timeout_ms")) {
      long ms = 0;
      ch.read("timeout_ms", ms);
      if (ms <= 0) throw ConfigError(ch.key_path("timeout_ms"), "must be > 0");
      c.chat.http.timeout = std::chrono::milliseconds(ms);
    }
    ch.read("max_retries", c.chat.http.max_retries);
    ch.read("model", c.chat.model);
    ch.read("temperature", c.chat.temperature);
    ch.read("filter_models", c.chat.filter_models);
    if (c.chat.filter_models.size() != 4) throw ConfigError(ch.key_path("filter_models"), "exactly four models required");
    ch.read("replay", c.chat.replay);
    ch.finish();
  }
  if (r.has("curation")) {
    auto cu = r.object("curation");
    cu.read("retries", c.curation_retries);
    cu.finish();
  }
  if (r.has("interpret")) {
    auto in = r.object("interpret");
    in.read("k", c.saliency_k);
    in.read("thumbnail_size", c.thumbnail_size);
    if (c.saliency_k == 0) throw ConfigError(in.key_path("k"), "must be >= 1");
    if (c.thumbnail_size == 0) throw ConfigError(in.key_path("thumbnail_size"), "must be >= 1");
    in.finish();
  }
  r.finish();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace slidelm::cli
