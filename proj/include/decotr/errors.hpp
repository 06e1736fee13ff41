#pragma once

#include <stdexcept>
#include <string>

namespace decotr {

/// Base of every error the library throws. Carries no extra state beyond the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or image shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Value outside the domain of an operation (division by exact zero, non-positive depth).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised when training produces a non-finite loss or prediction.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace decotr
