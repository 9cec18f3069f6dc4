#pragma once

#include <stdexcept>
#include <string>

namespace ver {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration; message names the violated bound.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Bad runtime input (out-of-range answer, malformed trace token, ...).
class InputError : public Error {
public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

// Non-finite value where a finite one is required; message carries diagnostics.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace ver
