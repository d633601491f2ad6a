// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hnsa {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An index (class label, token id) is outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// NaN/Inf where a finite number is required.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// API called out of order or with an unsupported argument.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace hnsa
