#pragma once

#include <stdexcept>
#include <string>

namespace proca {

// Tensor shapes that violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-range labels, non-unit quaternions, inconsistent configs.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Missing or malformed files, unreadable images, corrupt archives.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss term went non-finite. `term()` names it.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace proca
