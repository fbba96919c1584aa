#pragma once

#include <stdexcept>
#include <string>

namespace secad {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Supervision grid cannot drive a fit (all occupied or all empty).
class UnusableSupervisionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Precondition on shapes/layouts violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Operation requested on an object in the wrong mode or version.
class ModeError : public Error {
 public:
  using Error::Error;
};

}  // namespace secad
