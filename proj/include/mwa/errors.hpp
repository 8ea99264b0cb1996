#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mwa {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, optimizer or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (ids out of range, empty splits, unknown text).
class InputError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A loss function returned different values for identical inputs.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant did not hold on computed output.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// External words do not concatenate to the character sequence.
class AlignmentError : public InputError {
 public:
  AlignmentError(const std::string& what, std::size_t index)
      : InputError(what), index_(index) {}

  /// First character index at which words and text diverge.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace mwa
