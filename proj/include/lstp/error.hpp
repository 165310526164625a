#pragma once

#include <stdexcept>
#include <string>

namespace lstp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad or unknown configuration key/value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Scenario placement could not be satisfied within the attempt bound.
class InfeasibleScenarioError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or data file could not be read or does not match.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace lstp
