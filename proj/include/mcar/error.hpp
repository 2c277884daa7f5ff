#pragma once

#include <stdexcept>
#include <string>

namespace mcar {

// Bad user input: malformed files, out-of-range parameters, incompatible
// dimensions. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
public:
  ParseError(const std::string &what, int line)
      : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + what
                                 : what),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

class DimensionMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class OffPatternEntry : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ConcavityViolation : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace mcar
