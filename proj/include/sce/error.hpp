#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sce {

/// Base of every error raised by the library. The CLI maps each subclass to
/// an exit code (see ExitCode in cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: empty sets, missing text, impossible filters.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An id in a record does not resolve against the item table.
class ReferenceError : public InputError {
 public:
  using InputError::InputError;
};

/// A record is well formed but semantically invalid (e.g. "a a b").
class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class CheckpointError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// NaN/Inf encountered in a loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sce
