#pragma once

#include <stdexcept>
#include <string>

namespace ulsd {

// Exception hierarchy. The CLI maps these onto exit codes:
// ValidationError / DegenerateInputError -> 2, NumericalError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input, violated precondition, or inconsistent shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but geometrically degenerate (coincident samples,
// antipodal arc endpoints, zero-length segment where one is not allowed).
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An iterative solver failed to converge within its budget.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace ulsd
