#pragma once

#include <stdexcept>
#include <string>

namespace cfx {

// Each error family maps onto one CLI exit code (see cli.hpp).

/// Bad user-facing configuration: unknown option values, malformed config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, unreadable, unwritable or structurally broken files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset text. Carries the 1-based line (and column when known).
class ParseError : public IoError {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column = 0)
      : IoError(format(message, line, column)), line_(line), column_(column) {}

  /// Same position, message prefixed with `context` (typically the file name).
  ParseError(const std::string& context, const ParseError& inner)
      : IoError(context + ": " + inner.what()), line_(inner.line_), column_(inner.column_) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& message, std::size_t line, std::size_t column) {
    std::string out = "line " + std::to_string(line);
    if (column != 0) out += ", column " + std::to_string(column);
    return out + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

/// A domain precondition does not hold (too few neighbors, single-class data, shape mismatch).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfx
