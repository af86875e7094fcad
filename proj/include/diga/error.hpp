#pragma once

#include <stdexcept>
#include <string>

namespace diga {

// Bad or malformed user input (files, records, argument values).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request that is inconsistent with a stored configuration, e.g. sampling a
// discrete label from a continuous-encoder checkpoint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced by a numerical routine.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diga
