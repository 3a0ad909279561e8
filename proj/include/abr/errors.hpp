#pragma once

#include <stdexcept>
#include <string>

namespace abr {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or infeasible configuration (bad difficulty parameters, skill
// constraints that cannot be met, malformed run config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with user-supplied input data (corpora, datasets, pools).
class DataError : public Error {
 public:
  using Error::Error;
};

// A generated artifact violated one of its own invariants.
class InternalError : public Error {
 public:
  using Error::Error;
};

// Exact-arithmetic value left the representable range.
class ArithmeticOverflow : public Error {
 public:
  using Error::Error;
};

}  // namespace abr
