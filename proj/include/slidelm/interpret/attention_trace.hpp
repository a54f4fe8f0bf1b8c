#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace slidelm {

/// Attention from each generated token's query position to the visual
/// positions, for every decoder layer and head. Weights are raw softmax
/// probabilities, so a row over the visual span sums to at most 1.
struct AttentionTrace {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t n_patches = 0;
  std::vector<std::size_t> tokens;  // generated ids, one per step
  std::vector<double> weights;      // [step][layer][head][patch], row-major

  std::size_t steps() const noexcept { return tokens.size(); }
  double at(std::size_t step, std::size_t layer, std::size_t head, std::size_t patch) const {
    return weights[((step * layers + layer) * heads + head) * n_patches + patch];
  }
  double& at(std::size_t step, std::size_t layer, std::size_t head, std::size_t patch) {
    return weights[((step * layers + layer) * heads + head) * n_patches + patch];
  }
};

/// JSON with fields layers, heads, n_patches, tokens, weights.
void save_attention_trace(const std::string& path, const AttentionTrace& t);
/// Throws LoadError on malformed content or inconsistent dimensions.
AttentionTrace load_attention_trace(const std::string& path);

}  // namespace slidelm
