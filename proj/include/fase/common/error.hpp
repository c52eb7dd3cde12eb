#pragma once

#include <stdexcept>
#include <string>

namespace fase {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration or option value (CLI exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// An iterative solve failed to converge (CLI exit code 3).
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Input data does not match its declared schema (CLI exit code 4).
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Feeder graph is not a tree rooted at the slack bus.
class TopologyError : public SchemaError {
public:
  using SchemaError::SchemaError;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Information matrix of the correction step is not invertible.
class UnobservableError : public Error {
public:
  UnobservableError(const std::string& what, int null_dim)
      : Error(what), null_dimension(null_dim) {}
  int null_dimension;
};

} // namespace fase
