#pragma once

#include <stdexcept>
#include <string>

namespace swformer {

// Violated precondition or malformed input. CLI exit code 1.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Shape disagreement between tensor operands.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

// Non-finite values during training or evaluation. CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace swformer
