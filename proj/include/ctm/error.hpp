#pragma once

#include <stdexcept>
#include <string>

namespace ctm {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration (CLI exit status 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit status 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numeric breakdown such as contradictory evidence in inference (CLI exit status 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctm
