#pragma once

#include <stdexcept>
#include <string>

namespace hhmm {

/// Malformed input, inconsistent shapes, or invalid configuration.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation could not be completed (singular covariance, zero-likelihood
/// data, non-finite values).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hhmm
