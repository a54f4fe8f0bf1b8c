#include "slidelm/interpret/attention_trace.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"

namespace slidelm {

void save_attention_trace(const std::string& path, const AttentionTrace& t) {
  nlohmann::json j{{"layers", t.layers}, {"heads", t.heads}, {"n_patches", t.n_patches},
                   {"tokens", t.tokens}, {"weights", t.weights}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path + " for writing");
  f << j.dump() << '\n';
}

AttentionTrace load_attention_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open attention trace " + path);
  AttentionTrace t;
  try {
    const auto j = nlohmann::json::parse(f);
    j.at("layers").get_to(t.layers);
    j.at("heads").get_to(t.heads);
    j.at("n_patches").get_to(t.n_patches);
    j.at("tokens").get_to(t.tokens);
    j.at("weights").get_to(t.weights);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
  if (t.weights.size() != t.steps() * t.layers * t.heads * t.n_patches)
    throw LoadError(path + ": weights size does not match declared dimensions");
  return t;
}

}  // namespace slidelm
