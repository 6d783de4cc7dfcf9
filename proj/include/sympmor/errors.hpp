#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sympmor {

/// Dimension or argument mismatch.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid user configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure (CLI exit code 3). Carries the failing step when known.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::int64_t step = -1)
      : std::runtime_error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace sympmor
