#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adjoint_flow {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two fields (or a field and an operator) live on different grids.
class ConformabilityError : public Error {
 public:
  using Error::Error;
};

/// The diffusion tensor is not positive definite at some node.
class EllipticityError : public Error {
 public:
  using Error::Error;
};

/// An iterative method hit its iteration cap.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

/// Requested explicit step exceeds the stability bound.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value showed up during time integration.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Rate fit impossible on the requested window.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace adjoint_flow
