#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retrofilter {

enum class ErrorKind {
  Dimension,
  Domain,
  Symmetry,
  Singular,
  Convergence,
  Rank,
  Infeasible,
  DegenerateStep,
  EstimationFailure,
  Numerical,
  Config,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind survives
/// re-annotation, so callers can branch on it after context has been added.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a matrix that must be inverted has an eigenvalue at or below
/// the relative singularity threshold.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& message, double eigenvalue)
      : Error(ErrorKind::Singular, message), eigenvalue_(eigenvalue) {}

  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Rethrows `e` with `context` prepended to the message, keeping its kind.
[[noreturn]] void rethrow_with_context(const Error& e, std::string_view context);

}  // namespace retrofilter
