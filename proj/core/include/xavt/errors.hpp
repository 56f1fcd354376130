#pragma once

#include <stdexcept>
#include <string>

namespace xavt {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes or extents.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// An API precondition was violated by the caller.
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// A configuration value is invalid or inconsistent.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File format / filesystem problems.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite input is required.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// A verification run (e.g. gradient check) did not meet its tolerance.
struct VerifyError : Error {
  explicit VerifyError(const std::string& msg) : Error(msg) {}
};

}  // namespace xavt
