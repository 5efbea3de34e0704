// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace seqcred {

/// Invalid configuration (dimension mismatches, out-of-range model settings).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller misuse (unknown enum values, malformed arguments). CLI maps this to
/// exit code 2.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure (non-finite inputs, underflowed weights, quadrature that
/// could not converge and had no fallback).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seqcred
