#ifndef HIBP_ERRORS_HPP
#define HIBP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hibp {

// Bad parameters, malformed inputs and support violations.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File system and parse failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite intermediate values and undefined diagnostics.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

// Literal messages skip the string construction on the passing path.
inline void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace hibp

#endif  // HIBP_ERRORS_HPP
