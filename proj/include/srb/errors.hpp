#pragma once

#include <stdexcept>
#include <string>

namespace srb {

// Invalid user input or parameter-domain violation. The CLI maps these to exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: non-convergence, conditioning, rank loss. CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadrature refused to certify convergence; carries the achieved error estimate.
struct QuadratureError : NumericalError {
  QuadratureError(const std::string& what, double achieved_error)
      : NumericalError(what), achieved(achieved_error) {}
  double achieved;
};

// A vector family lost numerical rank during orthonormalization; achieved_dim is
// the number of directions that survived.
struct RankLossError : NumericalError {
  RankLossError(const std::string& what, int achieved_dimension)
      : NumericalError(what), achieved_dim(achieved_dimension) {}
  int achieved_dim;
};

// Operation requires a strictly rank-2 state and the spectrum collapsed.
struct DegenerateStateError : NumericalError {
  using NumericalError::NumericalError;
};

// Discretization grid cannot represent the state (mass leakage past the edges).
struct GridError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace srb
