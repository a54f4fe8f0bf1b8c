#pragma once

#include <map>
#include <string>
#include <vector>

#include "slidelm/numerics/parameters.hpp"

namespace slidelm {

/// On-disk parameter container.
///
/// Layout (all integers little-endian):
///   8 bytes  magic "SLMCKPT\0"
///   u32      format version (1)
///   u32      metadata entry count, then per entry: u32 len + key, u32 len + value
///   u32      tensor count, then per tensor:
///              u32 len + name, u32 rank, rank × u64 dims, numel × f64 values
/// Metadata entries are written in key order and always include `format`.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  static constexpr const char* kFormatId = "slidelm-ckpt";

  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

Checkpoint make_checkpoint(const ParameterStore& params, std::map<std::string, std::string> metadata);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Copies matching tensors into `params`. Throws LoadError on a missing name
/// or shape mismatch.
void restore_parameters(ParameterStore& params, const Checkpoint& ckpt);

}  // namespace slidelm
