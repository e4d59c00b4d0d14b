// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared across the library. Each maps onto one CLI exit code
// family (see tools/commands.hpp).

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtda {

/// Operand or parameter shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value is invalid or unknown.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A metric is undefined for the given input (e.g. ROC with a single class).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mtda
