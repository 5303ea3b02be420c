#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace survgen {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema or configuration does not describe a usable dataset.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A single CSV row could not be parsed. Carries the 1-based line number.
class RowError : public Error {
 public:
  RowError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Bad configuration value or file (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value or violated numeric precondition.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace survgen
