#pragma once

#include <stdexcept>
#include <string>

namespace mollify {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or model shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

/// The function does not expose the requested capability (e.g. parameters).
class CapabilityMissing : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// Rank correlation undefined because an input is constant.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class AllZero : public Error {
 public:
  using Error::Error;
};

}  // namespace mollify
