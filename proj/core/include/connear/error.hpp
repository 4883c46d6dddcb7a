#pragma once

#include <stdexcept>
#include <string>

namespace connear {

// Base of every error raised by the library. The category decides the CLI
// exit code: usage (2), data (3), numerical (4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

// Bad argument or inconsistent configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Unreadable, malformed or semantically invalid input data.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Divergence, non-finite loss or any other numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace connear
