// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IFASNET_ERROR_H_
#define IFASNET_ERROR_H_

#include <stdexcept>
#include <string>

namespace ifasnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced, or a numerically undefined quantity requested.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Input audio does not match what the model or pipeline expects.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ifasnet

#endif  // IFASNET_ERROR_H_
