#ifndef LIPS_ERROR_HPP
#define LIPS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lips {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Step size too large for the Euler product kernel.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// All particle weights are -inf (or NaN).
class CollapseError : public Error {
 public:
  using Error::Error;
};

class InconsistentObservations : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lips

#endif
