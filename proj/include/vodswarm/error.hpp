#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vodswarm {

// Error categories double as CLI exit codes and C API status values.
enum class ErrorKind : int {
  Usage = 1,      // bad flags, bad configuration
  InputData = 2,  // malformed traces, empty workloads, undefined metrics
  Internal = 3,   // protocol invariant violated
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::InputData, what) {}
};

// Thrown by the trace parser; line() is 1-based, 0 when not tied to a line.
class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what)
      : Error(ErrorKind::Internal, "invariant violated: " + what) {}
};

}  // namespace vodswarm
