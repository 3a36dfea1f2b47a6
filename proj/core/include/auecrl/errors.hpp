#pragma once

#include <stdexcept>
#include <string>

namespace auecrl {

// Common base so callers can catch any library error in one clause.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (or a tensor/config dimension mismatch).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced or supplied, or an ill-posed numeric request.
class NumericsError : public Error {
 public:
  using Error::Error;
};

// Malformed line/field in a text input (knowledge file, dataset, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or out-of-range run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (open/read/write).
class IOError : public Error {
 public:
  using Error::Error;
};

// Bad magic or unsupported version in a binary artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace auecrl
