#pragma once

#include <stdexcept>
#include <string>

namespace maec {

/// Malformed MAEC file (magic, version, dims or truncated payload).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad argument: wrong dims, negative densities, invalid parameters.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values, or an iterative kernel that hit its iteration cap.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace maec
