#pragma once

#include <stdexcept>
#include <string>

namespace vipcop {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: CSV parse failures, invalid tables, bad specs.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The black-box evaluator failed (protocol violation, timeout, bad output).
class EvaluatorError : public Error {
 public:
  using Error::Error;
};

// The evaluator cannot hold a context of the requested size. Callers such as
// the XL-context baseline shrink the context and retry.
class CapacityExceeded : public EvaluatorError {
 public:
  using EvaluatorError::EvaluatorError;
};

}  // namespace vipcop
