#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sedkit {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, created or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed tabular input. `row` is the 1-based data row (header excluded),
/// 0 when the problem is in the header itself.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error(row == 0 ? "header: " + what : "row " + std::to_string(row) + ": " + what),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace sedkit
