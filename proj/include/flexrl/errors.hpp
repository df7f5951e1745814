#pragma once

#include <stdexcept>
#include <string>

namespace flexrl {

/// Base class for all flexrl errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a divergence generator or its conjugate.
struct DomainError : Error {
  using Error::Error;
};

/// Table/vector dimensions do not match the MDP.
struct ShapeError : Error {
  using Error::Error;
};

/// Requested problem size exceeds a documented limit.
struct SizeError : Error {
  using Error::Error;
};

/// Join threshold outside a branch domain when composing a flexible divergence.
struct InvalidThreshold : Error {
  using Error::Error;
};

/// A branch derivative is not strictly monotone, so its inverse does not exist.
struct NonInvertible : Error {
  using Error::Error;
};

struct UnknownPreset : Error {
  using Error::Error;
};

/// Linear system solve failed or left a large residual.
struct SingularSystem : Error {
  using Error::Error;
};

/// Dataset does not cover the states reachable from the initial distribution.
struct CoverageError : Error {
  using Error::Error;
};

/// TD error left the conjugate domain during an oracle solve with clipping off.
struct DomainBlowup : Error {
  using Error::Error;
};

/// The dual flow constraint cannot be satisfied on the dataset support.
struct Infeasible : Error {
  using Error::Error;
};

/// No value-iteration checkpoint reaches a mixture component's target return.
struct CalibrationFailure : Error {
  using Error::Error;
};

/// A training table became non-finite; the run is aborted.
struct NanError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace flexrl
