#pragma once

#include <stdexcept>
#include <string>

namespace pmlab {

/// Base class for all pmlab errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid user-facing configuration (bad key, out-of-range value).
struct ConfigError : Error {
  using Error::Error;
};

/// Mathematical domain violation (negative base with fractional power,
/// cylinder outside the grid, empty slice).
struct DomainError : Error {
  using Error::Error;
};

/// A parameter violates an operation's stated precondition.
struct ParameterError : Error {
  using Error::Error;
};

/// An operation was invoked in the wrong regime / on the wrong label.
struct GuardError : Error {
  using Error::Error;
};

/// A relation that is proved impossible was observed; flags a bug or a
/// tolerance problem rather than bad input.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace pmlab
