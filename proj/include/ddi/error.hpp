#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ddi {

/// Base of every error raised by the library. The CLI maps DataError to
/// exit code 2 and UsageError to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text, positioned at a 1-based line/column when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : DataError(line ? what + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"
                       : what),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Data that parsed fine but breaks a domain invariant.
class ValidationError : public DataError {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : DataError(summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string summarize(const std::vector<std::string>& v) {
    std::string s = "validation failed with " + std::to_string(v.size()) + " violation(s)";
    for (std::size_t i = 0; i < v.size() && i < 5; ++i) s += "\n  " + v[i];
    return s;
  }
  std::vector<std::string> violations_;
};

class OffsetError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ddi
