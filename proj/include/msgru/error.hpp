#pragma once

#include <stdexcept>
#include <string>

namespace msgru {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (empty sequence, bad index, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Image/zone geometry that cannot be partitioned as required.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Unknown or malformed configuration keys and values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent dataset contents.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Persisted files with a bad magic, version or layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace msgru
