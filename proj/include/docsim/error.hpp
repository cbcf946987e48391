#pragma once

#include <stdexcept>
#include <string>

namespace docsim {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or parameter combination (maps to CLI exit code 2).
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing, or inconsistent data (maps to CLI exit code 4).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before its upstream checkpoint exists
/// (maps to CLI exit code 3).
class StageOrderError : public Error {
 public:
  using Error::Error;
};

}  // namespace docsim
