#pragma once

#include <stdexcept>
#include <string>

namespace levylab {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: violated precondition, invalid triplet, malformed config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Evaluation outside the domain an object was built for.
class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A documented precondition of an operation does not hold for the inputs.
class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical failure: a quadrature that would not converge, a root bracket
/// that kept growing, a step size with too many expected jumps.
///
/// `estimate` and `error_estimate` carry the last state reached so callers can
/// report how far off the computation was.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double estimate = 0.0, double error_estimate = 0.0)
      : Error(what), estimate_(estimate), error_estimate_(error_estimate) {}

  double estimate() const noexcept { return estimate_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double estimate_;
  double error_estimate_;
};

// A state at which a scheme has no jump mass (e.g. c(a) = 0 in the stable scheme).
class DegenerateStateError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace levylab
