#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace peem {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data. The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

// An external tool or the energy meter could not be used. Exit code 3.
class ToolError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : DataError(line == 0 ? reason : "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

class MergeError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientData : public DataError {
 public:
  using DataError::DataError;
};

class ZeroVariance : public DataError {
 public:
  using DataError::DataError;
};

class ZeroMeasured : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInput : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientSamples : public DataError {
 public:
  using DataError::DataError;
};

class TooFewGroups : public DataError {
 public:
  using DataError::DataError;
};

class EmptyProfile : public DataError {
 public:
  using DataError::DataError;
};

class EmptyFilter : public DataError {
 public:
  using DataError::DataError;
};

class OverwriteRefused : public DataError {
 public:
  using DataError::DataError;
};

// Caller violated a documented precondition (wrong model mode, zero window, ...).
class PreconditionError : public DataError {
 public:
  using DataError::DataError;
};

class DomainUnavailable : public ToolError {
 public:
  using ToolError::ToolError;
};

class ToolMissing : public ToolError {
 public:
  using ToolError::ToolError;
};

class CommandFailed : public ToolError {
 public:
  explicit CommandFailed(int status)
      : ToolError("command failed with exit status " + std::to_string(status)), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace peem
