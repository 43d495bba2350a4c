#pragma once

#include <stdexcept>
#include <string>

namespace rabikit {

// Bad user input: malformed files, out-of-domain parameters, ill-posed
// problems. CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what)
      : std::invalid_argument(what) {}
};

// A numerical procedure failed to meet its contract (non-convergent
// quadrature, ODE step-size collapse, ...). CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

// Singular least-squares normal matrix; carries the offending parameter
// combination in the message.
class RankDeficiencyError : public NumericalError {
 public:
  explicit RankDeficiencyError(const std::string& what)
      : NumericalError(what) {}
};

}  // namespace rabikit
