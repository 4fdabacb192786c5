// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hiba {

/// A caller broke a documented precondition (shape, range, empty input).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Softmax row with every position masked out.
class MaskingError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// A forward op produced NaN or Inf from finite inputs, or training diverged.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or version-mismatched file, or an I/O failure.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace hiba
