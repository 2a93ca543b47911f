#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gig {

// Base of everything the library throws on bad input or failed stages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document or DSL text. Line/column are 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    if (line == 0) return what;
    return what + " at line " + std::to_string(line) + ", column " + std::to_string(column);
  }

  std::size_t line_;
  std::size_t column_;
};

// Structural invariant broken: dangling edge, duplicate eid, unknown column...
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Distance function applied to values of the wrong kind.
class TypeError : public Error {
 public:
  using Error::Error;
};

// Training diverged or failed to reduce the loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace gig
