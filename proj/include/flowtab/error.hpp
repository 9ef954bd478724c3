#pragma once

#include <stdexcept>
#include <string>

namespace flowtab {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Stable, machine-readable error class name.
  virtual const char* kind() const noexcept { return "Error"; }
};

/// Malformed input that is rejected before any computation (exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ValidationError"; }
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "SchemaError"; }
};

class WeightError : public ValidationError {
 public:
  using ValidationError::ValidationError;
  const char* kind() const noexcept override { return "WeightError"; }
};

/// Individually valid inputs that disagree with each other (exit code 3).
class ConsistencyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConsistencyError"; }
};

class DominanceError : public ConsistencyError {
 public:
  using ConsistencyError::ConsistencyError;
  const char* kind() const noexcept override { return "DominanceError"; }
};

class PacketizeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "PacketizeError"; }
};

class DegenerateError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "DegenerateError"; }
};

class UnreachableError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "UnreachableError"; }
};

}  // namespace flowtab
