#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bidomain {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A conductivity tensor violates the uniform ellipticity bounds.
class EllipticityViolation : public Error {
public:
  using Error::Error;
};

/// The outward normal is not an eigenvector of a boundary tensor.
class EVViolation : public Error {
public:
  using Error::Error;
};

class SymmetryViolation : public Error {
public:
  using Error::Error;
};

class GridMismatch : public Error {
public:
  using Error::Error;
};

class NotMeanZero : public Error {
public:
  using Error::Error;
};

class TooLargeToAssemble : public Error {
public:
  using Error::Error;
};

class NonSymmetric : public Error {
public:
  using Error::Error;
};

/// Spectral parameter on the closed negative real axis.
class LambdaOnCut : public Error {
public:
  using Error::Error;
};

/// Source means do not cancel (current conservation fails).
class CompatibilityViolation : public Error {
public:
  using Error::Error;
};

class IncompatibleMeans : public Error {
public:
  using Error::Error;
};

class ThetaOutOfSector : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Iterative solve hit its cap; carries the relative residual history.
class LinearSolveDivergence : public Error {
public:
  LinearSolveDivergence(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

}  // namespace bidomain
