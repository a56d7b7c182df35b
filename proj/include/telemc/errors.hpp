#ifndef TELEMC_ERRORS_HPP
#define TELEMC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace telemc {

// Base class for all numerical failures raised by the library. Precondition
// violations (bad arguments, malformed configs) use std::invalid_argument
// instead; Error subclasses signal conditions detected mid-computation.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An importance-weight numerator came out non-finite, or every numerator
// vanished so the weights cannot be normalized.
struct NonFiniteWeight : Error {
  using Error::Error;
};

// A Metropolis ratio Z/Z' could not be formed (zero or non-finite Z).
struct NonFiniteRatio : Error {
  using Error::Error;
};

// full_mh_ratio_oracle requires ensembles differing on exactly one index.
struct DiffersOnMultipleIndices : Error {
  using Error::Error;
};

// Cholesky factorization failed even at the maximum jitter level.
struct NotFactorizable : Error {
  using Error::Error;
};

// The mean-field right-hand side is undefined (Z_rho zero or non-finite).
struct NonFiniteRhs : Error {
  using Error::Error;
};

// Forward Euler produced a density value below the negativity budget.
struct NegativityBreach : Error {
  using Error::Error;
};

// Not enough points in the tail window to fit a decay rate.
struct InsufficientWindow : Error {
  using Error::Error;
};

// Requested exact enumeration exceeds the S^N size guard.
struct TooLarge : Error {
  using Error::Error;
};

// Invalid experiment configuration; message names the offending field.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace telemc

#endif
