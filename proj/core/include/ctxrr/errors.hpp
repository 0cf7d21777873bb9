#pragma once

#include <stdexcept>
#include <string>

namespace ctxrr {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad API usage: calling backward() on a non-scalar, stepping without grads.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Embedding invariants violated (norm, part count).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxrr
