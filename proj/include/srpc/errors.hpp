#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srpc {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes (input errors 2, sampler failures 3, shape mismatches 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class MissingData : public InputError {
 public:
  MissingData(std::size_t row, std::size_t col)
      : InputError("missing value at row " + std::to_string(row) + ", column " +
                   std::to_string(col)),
        row(row),
        col(col) {}
  std::size_t row;
  std::size_t col;
};

class BadLevel : public InputError {
 public:
  using InputError::InputError;
};

class BadSubpop : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class BadParameter : public Error {
 public:
  using Error::Error;
};

class BadConcentration : public BadParameter {
 public:
  using BadParameter::BadParameter;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class InsufficientPermutations : public InputError {
 public:
  using InputError::InputError;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Wraps any failure raised inside a Gibbs sweep with the iteration index.
class SamplerFailure : public Error {
 public:
  SamplerFailure(long iteration, const std::string& what)
      : Error("sampler failed at iteration " + std::to_string(iteration) + ": " + what),
        iteration(iteration) {}
  long iteration;
};

}  // namespace srpc
