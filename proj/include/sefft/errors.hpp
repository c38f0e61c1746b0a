#pragma once

#include <stdexcept>
#include <string>

namespace sefft {

/// Invalid shapes, schedules or configuration values. CLI exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. running a backward pass without a gradient buffer.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed files, I/O failures, non-finite numbers at runtime. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sefft
