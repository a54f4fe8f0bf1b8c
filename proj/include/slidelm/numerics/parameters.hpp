#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "slidelm/numerics/autograd.hpp"
#include "slidelm/rng.hpp"

namespace slidelm {

/// Ordered registry of named parameters. Names are "<group>.<path>".
class ParameterStore {
 public:
  /// Returns a handle sharing storage with the stored parameter.
  Parameter add(std::string name, Tensor value, bool trainable = true);

  std::vector<Parameter>& all() noexcept { return params_; }
  const std::vector<Parameter>& all() const noexcept { return params_; }

  /// Parameters whose name starts with "<group>.".
  std::vector<Parameter> group(std::string_view group) const;
  std::vector<std::string> groups() const;

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  void set_group_trainable(std::string_view group, bool trainable);
  void zero_grad();

  /// SHA-256 over names, shapes and raw value bytes of the group.
  std::string checksum(std::string_view group) const;

 private:
  std::vector<Parameter> params_;
};

std::string_view group_of(std::string_view name);

/// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform_fan_in(Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace slidelm
