#pragma once

#include <stdexcept>
#include <string>

namespace treg {

// Base class for all errors raised by the library. The CLI maps subclasses
// onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated (empty queue, zero-area box, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A region of interest lies completely outside a feature map.
class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Frame indices fed to the template queue are not strictly increasing.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Invalid sequence specification (e.g. target leaves the image).
class SpecError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown keys, missing checkpoints, invalid values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required input file or directory does not exist.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace treg
