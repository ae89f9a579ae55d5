#pragma once

#include <stdexcept>
#include <string>

namespace sparselab {

// Base for every error the library raises. Subclasses map onto the CLI exit
// codes (config 2, numerical 3, io 4); the rest surface as generic failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain (bad labels, infeasible density...).
class InputError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by the engine, a diverged loss, or a failed attack.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration; the message carries the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparselab
