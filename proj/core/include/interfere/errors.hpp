#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace interfere {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a data-model invariant. The CLI maps this to exit 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed delimited input; carries the 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A sensitivity parameter outside the interval admitted by the data.
class RangeError : public ValidationError {
 public:
  RangeError(const std::string& what, double lo, double hi)
      : ValidationError(what + " (admissible interval [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// The data cannot support the requested estimate. The CLI maps this to exit 3.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// An iterative fit failed (divergence, singular system, separation).
class FitError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Enumeration requested beyond the supported cluster size.
class CapacityError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace interfere
