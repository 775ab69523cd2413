#pragma once

#include <stdexcept>
#include <string>

namespace fedmse {

/// Invalid configuration, shape or dimension mismatch. The CLI maps this to
/// exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unusable input data (empty sets, single-class labels, too few rows).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked on an object that is not ready for it.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedmse
