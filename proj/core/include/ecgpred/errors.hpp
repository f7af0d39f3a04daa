#pragma once

#include <stdexcept>
#include <string>

namespace ecgpred {

// Bad invocation or configuration (CLI exit code 1).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or malformed input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Degenerate geometry or numerical failure (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ecgpred
