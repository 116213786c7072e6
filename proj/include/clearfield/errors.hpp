#pragma once

#include <stdexcept>
#include <string>

namespace clearfield {

/// Input violates a documented precondition or file contract.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clearfield
