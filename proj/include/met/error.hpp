#pragma once

#include <stdexcept>
#include <string>

namespace met {

// Input outside the state space or a function's domain.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// A documented precondition (audit, shape, hypothesis) does not hold.
struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Singular matrices, divergent series, horizons too short to resolve.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace met
