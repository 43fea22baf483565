#pragma once

#include <stdexcept>
#include <string>

namespace refbench {

// Failure classes map 1:1 onto CLI exit codes (see tools/main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unresolvable run configuration. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Schema violations, invariant breaches, failed joins, malformed files. Exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Transport, auth, or endpoint failures. Exit code 4.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

// Judge (or verifier) output that could not be parsed. Exit code 5.
// Carries the raw model output for diagnostics.
class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

}  // namespace refbench
