#pragma once

#include <stdexcept>
#include <string>

namespace anonact {

// Bad shapes, invalid indices, inconsistent configuration.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sequence longer than the model context.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed or truncated on-disk artifact.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, vocabulary misses and other conditions that signal a bug
// upstream rather than bad user input.
class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage was asked to run before its inputs exist.
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace anonact
