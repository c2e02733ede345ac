#pragma once

#include <stdexcept>
#include <string>

namespace crsr {

/// Root of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input collection was empty or every element was rejected.
class NoDataError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions violate an operation's shape contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A non-finite or otherwise numerically invalid value was encountered.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Persisted or in-memory training state is missing, stale, or incompatible.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A configuration value failed validation. `key()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error("config error [" + key + "]: " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace crsr
