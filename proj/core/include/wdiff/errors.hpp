#pragma once

#include <stdexcept>
#include <string>

namespace wdiff {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation at a point where the weight or a coefficient is singular.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

/// A quadrature failed its convergence test; the integrand is most likely
/// not locally integrable on the requested region.
class DivergentIntegralError : public Error {
 public:
  using Error::Error;
};

class DegenerateTestFunctionError : public Error {
 public:
  using Error::Error;
};

class NonSymmetricMatrixError : public Error {
 public:
  using Error::Error;
};

class NonPositiveRatioError : public Error {
 public:
  using Error::Error;
};

class IndefiniteMatrixError : public Error {
 public:
  using Error::Error;
};

class CoincidentPointsError : public Error {
 public:
  using Error::Error;
};

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. `pointer` is a JSON pointer to the offending key.
class SpecError : public Error {
 public:
  SpecError(std::string pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

}  // namespace wdiff
