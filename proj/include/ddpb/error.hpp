#pragma once

#include <stdexcept>
#include <string>

namespace ddpb {

// Error categories surfaced by the CLI as distinct exit codes.
// Precondition violations on pure functions use std::invalid_argument.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddpb
