#pragma once

#include <stdexcept>
#include <string>

namespace stereorisk {

// Arguments or data violating a documented precondition.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Filesystem, decoding, or serialization failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stereorisk
