#pragma once

#include <stdexcept>
#include <string>

namespace cifpoint {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (maps to CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical computation that cannot be carried out (maps to CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotEstimable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroVariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateRiskSet : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SeparationDetected : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnreachableTarget : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficientDesign : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, int iterations, double residual)
      : NumericalError(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace cifpoint
