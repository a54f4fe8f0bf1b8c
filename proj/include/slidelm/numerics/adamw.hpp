#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "slidelm/numerics/autograd.hpp"

namespace slidelm {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam. Moments are keyed by parameter name; frozen
/// parameters are skipped entirely and never receive moments.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Parameter> params);

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  AdamWConfig& config() noexcept { return cfg_; }

  struct Moments {
    Tensor first;
    Tensor second;
  };
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }
  /// Seeds a moment entry, e.g. when restoring state.
  void set_moments(const std::string& name, Moments m) { moments_[name] = std::move(m); }

 private:
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace slidelm
