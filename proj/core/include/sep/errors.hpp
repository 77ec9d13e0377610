#pragma once

#include <stdexcept>
#include <string>

namespace sep {

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rates of form (degree-preserving expansion) cannot be written with
// non-negative reservoir/copy parameters.
struct NegativityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stationary equation has no unique solution (left chain not ergodic).
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateSpaceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chain has more than one closed communicating class.
struct ReducibleChain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dual run exceeded its event cap (possible for non weak-dependence specs).
struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sep
