#pragma once

#include <stdexcept>
#include <string>

namespace alert_surface {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration (bad enum, wrong vector length, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unusable input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Too few distinct design points for the number of mean parameters.
class IdentifiabilityError : public DataError {
 public:
  using DataError::DataError;
};

/// An optimizer exhausted its starts without converging.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A bootstrap replicate could not be refitted within the retry budget.
class BootstrapError : public ConvergenceError {
 public:
  BootstrapError(int level, std::size_t first_index, std::size_t second_index,
                 const std::string& what)
      : ConvergenceError(what),
        level_(level),
        first_index_(first_index),
        second_index_(second_index) {}

  int level() const noexcept { return level_; }
  std::size_t first_index() const noexcept { return first_index_; }
  std::size_t second_index() const noexcept { return second_index_; }

 private:
  int level_;
  std::size_t first_index_;
  std::size_t second_index_;
};

}  // namespace alert_surface
