#pragma once

#include <stdexcept>
#include <string>

namespace sdoh {

// Error taxonomy mirrors the CLI exit codes: config = 1, data = 2, backend = 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  enum class Kind {
    Timeout,
    RateLimited,
    AuthFailure,
    ReplayMiss,
    IoFailure,
  };

  BackendError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace sdoh
