#pragma once

#include <stdexcept>
#include <string>

namespace xmd {

// Error categories map one-to-one onto CLI exit codes (see tools/xmdistill.cpp).

/// Invalid configuration, shape mismatch, or misuse of an API. Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Calling an operation out of order (backward before forward, weights before warmup).
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Bad input data: labels out of range, degenerate vectors. Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file. Carries the byte offset where parsing failed.
class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-finite value produced during computation. Exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xmd
