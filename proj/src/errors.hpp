#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ampsize {

// Malformed netlist text. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Bad parameter vector, bad designation, or a simulator failure.
class CircuitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public CircuitError {
 public:
  using CircuitError::CircuitError;
};

class ConvergenceError : public CircuitError {
 public:
  ConvergenceError(const std::string& message, double residual)
      : CircuitError(message), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calling an API out of sequence (step past done, backward before forward...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ampsize
