#pragma once

#include <stdexcept>
#include <string>

namespace reentry {

// Tensor shapes disagree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Pooling over zero (unmasked) rows.
class EmptyPoolError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OptimizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// AUC on a single-class label set.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace reentry
