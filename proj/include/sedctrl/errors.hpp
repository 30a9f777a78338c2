#pragma once

#include <stdexcept>
#include <string>

namespace sedctrl {

// Bad inputs: parameter ranges, malformed matrices, inconsistent sizes.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Iterative solves that hit the step cap, blow up, or find no/too many roots.
class NonConvergenceError : public std::runtime_error {
 public:
  explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// File system and parse failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sedctrl
