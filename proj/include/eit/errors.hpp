#pragma once

#include <stdexcept>
#include <string>

namespace eit {

/// Bad input: malformed geometry, inconsistent sizes, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation that is well posed in exact arithmetic but failed in floating point
/// (singular factorization, line-search breakdown, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eit
