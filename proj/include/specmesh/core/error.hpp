#pragma once

#include <stdexcept>
#include <string>

namespace specmesh {

/// Bad input: out-of-range indices, malformed files, inconsistent shapes or
/// configs. The CLI maps these to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation produced a non-finite value or failed to converge.
/// The CLI maps these to exit code 1.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk artifact (bad magic, truncated payload, CRC mismatch).
class FormatError : public ValidationError {
 public:
  explicit FormatError(const std::string& what) : ValidationError(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace specmesh
