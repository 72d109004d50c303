#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dmaddpg {

// Raised when training or optimization produces a non-finite value.
// Dimension and configuration errors use std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::int64_t step = -1)
      : std::runtime_error(what), step_(step) {}

  // Environment step at which the failure was detected, or -1 if unknown.
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace dmaddpg
