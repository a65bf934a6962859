#pragma once

#include <stdexcept>
#include <string>

namespace fracsym {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// A series, quadrature or iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double last_residual = 0.0)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

private:
  double last_residual_;
};

/// Two grid functions that must share a geometry do not.
class GridMismatchError : public Error {
public:
  using Error::Error;
};

/// Invalid experiment or problem configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace fracsym
