#pragma once

#include <stdexcept>
#include <string>

namespace fracsus {

// Every failure raised by the library derives from Error. The CLI maps
// ValidationError to exit status 1 and QualityError/ConvergenceError to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// The critical orbit left the invariant interval.
class EscapeError : public Error {
 public:
  using Error::Error;
};

// D_k = 0 along the critical orbit; no sign or exponent can be assigned.
class DegenerateOrbitError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class QualityError : public Error {
 public:
  using Error::Error;
};

class MethodError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace fracsus
