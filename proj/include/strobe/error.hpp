#pragma once

#include <stdexcept>
#include <string>

namespace strobe {

// Invalid parameters, malformed inputs, or violated preconditions that the
// caller can fix. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative or numerical routine could not produce a trustworthy answer
// (non-convergence, degenerate data). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

}  // namespace detail
}  // namespace strobe
