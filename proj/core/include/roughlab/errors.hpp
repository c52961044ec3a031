#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roughlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by caller-supplied data (bad dimension, range, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not complete (factorization, blow-up, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Covariance factorization failed after the jitter policy was exhausted.
class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, double smallest_eigenvalue);
  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

/// RDE state left the explosion guard.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(std::size_t step, double norm, double guard);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A user callback threw while being evaluated at a given grid step.
class CallbackError : public NumericalError {
 public:
  CallbackError(std::size_t step, const std::string& inner);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace roughlab
