#pragma once

#include <stdexcept>
#include <string>

namespace nsl {

// Bad specs, bad configs, schema violations. CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failures discovered while running: corrupt files, NaN losses, degenerate
// scenes. CLI maps these to exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

class CorruptSampleError : public RuntimeFailure {
 public:
  explicit CorruptSampleError(const std::string& what) : RuntimeFailure(what) {}
};

class NonFiniteError : public RuntimeFailure {
 public:
  explicit NonFiniteError(const std::string& what) : RuntimeFailure(what) {}
};

}  // namespace nsl
