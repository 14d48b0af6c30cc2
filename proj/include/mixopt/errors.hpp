#pragma once

#include <stdexcept>
#include <string>

namespace mixopt {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid inputs: bad parameters, malformed files, dimension mismatches.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

/// Evaluation hit an undefined point (zero power-law base) or produced a
/// non-finite value that cannot be returned silently.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace mixopt
