#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace nami {

// Base for every error raised by the library. The CLI maps InputError and
// its subclasses to exit code 2 and NumericalError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

// Argument outside the support of a transformation function.
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

// Value outside the attainable range of a transformation function.
class RangeError : public InputError {
 public:
  using InputError::InputError;
};

class UnsupportedError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IdentifiabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Optimizer gave up; carries the best iterate seen so far.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best, double best_value)
      : NumericalError(what), best_(std::move(best)), best_value_(best_value) {}

  const Eigen::VectorXd& best() const { return best_; }
  double best_value() const { return best_value_; }

 private:
  Eigen::VectorXd best_;
  double best_value_;
};

}  // namespace nami
