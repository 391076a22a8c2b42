#pragma once

#include <stdexcept>
#include <string>

namespace pmp {

/// Shape or indexing inconsistency between a graph, an assignment or a model.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A request exceeds an enumeration or memory budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hyperparameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input bytes. `offset()` is the byte position where parsing stopped.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A candidate solution or configuration violates a stated constraint.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, long constraint = -1)
      : std::runtime_error(what), constraint_(constraint) {}
  long constraint() const noexcept { return constraint_; }

 private:
  long constraint_;
};

}  // namespace pmp
