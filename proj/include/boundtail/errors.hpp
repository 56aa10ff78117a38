#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace boundtail {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input (configuration, grid parameters, family parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain X or the noise interval.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Monotonicity hypothesis violated: a partial derivative is not positive.
class NonMonotoneError : public Error {
 public:
  using Error::Error;
};

/// Target value outside the reachable set F(x) = [h-(x), h+(x)].
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class NoFixedPointError : public Error {
 public:
  using Error::Error;
};

class NotFixedPointError : public Error {
 public:
  using Error::Error;
};

/// No derivative order r <= 6 separates the fixed point from the identity.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Power iteration hit its budget. Carries the last iterate.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, std::vector<double> best, double residual)
      : Error(what), best_iterate(std::move(best)), best_residual(residual) {}
  std::vector<double> best_iterate;
  double best_residual;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

/// A Monte Carlo iterate left the domain X.
class EscapeError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// Orbit of h+ stopped moving toward the boundary before the target.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IterationCapError : public Error {
 public:
  using Error::Error;
};

/// Too few usable points in a fitting window.
class WindowError : public Error {
 public:
  using Error::Error;
};

}  // namespace boundtail
