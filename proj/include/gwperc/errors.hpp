#pragma once

#include <stdexcept>
#include <string>

namespace gwperc {

// Bad user input: malformed distribution files, out-of-range parameters,
// unparsable tree strings.  The CLI maps this family to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A computation asked for a moment of higher order than the distribution
// can deliver at full accuracy (relevant for truncated tails).
class MomentUnavailableError : public std::runtime_error {
 public:
  explicit MomentUnavailableError(const std::string& msg) : std::runtime_error(msg) {}
};

// A tree or enumeration outgrew its configured budget.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative numeric routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gwperc
