#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdepca {

/// Base of every error the library raises. The CLI maps each subclass to an
/// exit code, so new error classes should derive from the closest category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: out-of-range parameters, nonfinite entries, malformed config.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between matrices, vectors or increment tables.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Parameter outside the mathematical domain of a formula (p < 2, delta not in (0,1), ...).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Requested operation is not defined for this kind of system.
class UnsupportedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DivergedError : public Error {
 public:
  DivergedError(std::size_t step, const std::string& what)
      : Error(what), step_(step) {}

  /// First step index whose state is nonfinite or exceeds the divergence bound.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// No stability certificate can be issued (e.g. a nonpositive Lyapunov margin).
class NoCertificateError : public Error {
 public:
  using Error::Error;
};

/// The coarse monotonicity scan preceding a bisection failed. The message
/// carries the scan table.
class MonotonicityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdepca
