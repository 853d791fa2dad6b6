#pragma once

#include <stdexcept>
#include <string>

namespace dcu {

// Bad or inconsistent experiment configuration. The message names the field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values, singular systems, degenerate encoders.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files, unwritable outputs, malformed input tables.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcu
