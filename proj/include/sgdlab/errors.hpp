#pragma once

#include <stdexcept>
#include <string>

namespace sgdlab {

/// Base of every error thrown by the library. Messages are prefixed with the
/// module that raised them, e.g. "sde_engine: ...".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Normalising a vector whose length is below the degeneracy threshold.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A matrix expected to be positive semi-definite has an eigenvalue below
/// the clamp tolerance.
class PsdViolation : public Error {
 public:
  using Error::Error;
};

/// A displaced grid point left the tabulated domain.
class OutsideDomain : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// Non-finite state produced by an integrator.
class Divergence : public Error {
 public:
  using Error::Error;
};

/// Oracle step-doubling self-check exceeded its tolerance.
class RefinementFailure : public Error {
 public:
  using Error::Error;
};

/// Coordinate reduction disagrees with the generator it reduces.
class DerivationMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgdlab
