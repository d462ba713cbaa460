#pragma once

#include <stdexcept>
#include <string>

namespace granular {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the inputs of an operation does not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A computed state breaks a physical invariant (feasibility, sign of the
/// adhesion potential, non-finite force, ...).
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string check, const std::string& what)
      : Error(check + ": " + what), check_(std::move(check)) {}

  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

/// Fixed point iteration did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

}  // namespace granular
