#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bargewatch {

// Input that is well-formed but violates a range or consistency rule.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text that could not be tokenized. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A reference (class index, parent id, ...) that does not resolve.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bargewatch
