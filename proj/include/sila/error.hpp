#pragma once

#include <stdexcept>
#include <string>

namespace sila {

/// Invalid or inconsistent input data: malformed trajectories, files, or
/// arguments that violate an operation's preconditions.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A broken internal invariant. Seeing one of these means a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sila
