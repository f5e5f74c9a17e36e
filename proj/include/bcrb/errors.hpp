#pragma once

#include <stdexcept>
#include <string>

namespace bcrb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two fields or a field and a metric live on different grids.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// Inputs violate a documented precondition (bad sizes, negative spacing, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A density dropped below the admissible floor on an interior node.
class DensityFloorError : public Error {
 public:
  using Error::Error;
};

/// rho * v does not vanish on the boundary of the box.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be invertible / positive definite is not.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// The weight field u is not in the range of the field operator.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration does not match the scenario schema; `path` names the field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace bcrb
