#pragma once

#include <stdexcept>
#include <string>

namespace mtf {

/// Thrown when training or prediction produces non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown for invalid experiment or scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtf
