#pragma once

#include <stdexcept>
#include <string>

namespace squirrels {

/// Bad input: malformed config, inconsistent dimensions, out-of-domain parameters.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its contract (non-convergence, flat curves, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace squirrels
