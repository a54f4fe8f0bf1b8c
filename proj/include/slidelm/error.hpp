#pragma once

#include <stdexcept>
#include <string>

namespace slidelm {

/// Caller violated an operation's precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value is invalid. `key_path()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::invalid_argument(key_path + ": " + message), key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

/// A file could not be read or its contents are malformed.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slidelm
