// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace kaizen {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, binary16 overflow, NaN losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Two parameter vectors (or matrices) whose structure does not agree.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// A CTC target that cannot be aligned to the available frames.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside an operation's domain (bad token ids, bounds).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Invalid or missing configuration fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset or checkpoint files.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace kaizen
