#pragma once

#include <stdexcept>
#include <string>

namespace cbp {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid model construction (dimension mismatch, dangling ids, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when unknown.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
  int line = 0;
};

/// Inference reached an all-zero message or belief (inconsistent evidence).
struct ContradictionError : Error {
  using Error::Error;
};

/// A size budget was exceeded (e.g. exact counter called on too large a formula).
struct BudgetError : Error {
  using Error::Error;
};

}  // namespace cbp
