#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace encinit {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A window, sample or section index fell outside the data it refers to.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Matrix or vector dimensions do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, missing key, or bad command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Base for failures of a numerical procedure (CLI exit code 2).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class UnobservableError : public NumericalError {
 public:
  UnobservableError(long rank, long required)
      : NumericalError("system is not observable over the window: rank " + std::to_string(rank) +
                       " < n_x = " + std::to_string(required)),
        rank_(rank) {}

  long rank() const noexcept { return rank_; }

 private:
  long rank_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what + " (final residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Non-finite value encountered; `index` is the time step or epoch where it appeared.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long index)
      : NumericalError(what + " at index " + std::to_string(index)), index_(index) {}

  long index() const noexcept { return index_; }

 private:
  long index_;
};

}  // namespace encinit
