#pragma once

#include <stdexcept>
#include <string>

namespace conjointnet {

// Base for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes disagree (matrix ops, layer inputs, checkpoints).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// API used out of order, e.g. backward() without a Train-mode forward().
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or argument values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input files are missing, malformed or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training produced NaN/Inf or otherwise diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Process exit codes used by the command line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const ProtocolError*>(&e))
    return kExitValidation;
  return kExitFailure;
}

}  // namespace conjointnet
