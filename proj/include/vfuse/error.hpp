#pragma once

#include <stdexcept>
#include <string>

namespace vfuse {

// Base for every error the library raises. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Labels that leave a ranking metric or a training problem undefined (CLI exit code 4).
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

}  // namespace vfuse
