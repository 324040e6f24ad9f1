#pragma once

#include <stdexcept>
#include <string>

namespace vrdiff {

// Invalid or inconsistent input data: parse failures, dangling references,
// dimension mismatches, incompatible checkpoints.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: training divergence, non-finite values where finite
// ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vrdiff
