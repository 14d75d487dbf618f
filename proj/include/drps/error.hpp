#pragma once

#include <stdexcept>
#include <string>

namespace drps {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter lies outside its admissible range (gamma <= 0, lambda outside (0,2], ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// One subspace contains the other, so no principal angle lies past the intersection.
class ContainmentError : public Error {
 public:
  using Error::Error;
};

/// A constraint {x : Ax = y} with y outside the range of A.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The solver did not reach the requested fixed-point tolerance.
class NotConvergedError : public Error {
 public:
  using Error::Error;
};

/// A linearized model has spectral radius >= 1 away from its fixed space.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Too few usable points for a rate fit.
class WindowTooShortError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing an output file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_same_dim(long a, long b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail
}  // namespace drps
