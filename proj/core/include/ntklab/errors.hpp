#pragma once

#include <stdexcept>

namespace ntklab {

// Bad shapes, bad preconditions, bad config files. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Divergence, non-convergence, corrupt numeric payloads. The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ntklab
