#pragma once

#include <stdexcept>

namespace epl {

// Invalid or inconsistent user-supplied configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iterative routine failed its convergence contract (CLI exit code 3).
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace epl
