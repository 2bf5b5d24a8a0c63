// Copyright 2026 The rankserve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rankserve {

// Caller supplied a value that violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input file or record could not be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic has no defined value for the given input (e.g. Tau-b on
// all-tied data).
class UndefinedResult : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Event log does not match the configuration it is replayed under.
class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rankserve
