#pragma once

#include <stdexcept>
#include <string>

namespace latentmark {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents (WAV, codec or key files).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Dimension or length mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Waveform sample rate does not match what the operation requires.
class RateError : public Error {
 public:
  using Error::Error;
};

/// Signal too short for the requested operation (e.g. shorter than a frame).
class LengthError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Degenerate input where the result is undefined (zero variance, zero power).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Stored values violate a declared invariant (e.g. tau != mu + k*sigma).
class ConsistencyError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace latentmark
