// Copyright 2026 The relmatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace relmatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or an invalid axis.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced by a forward op, or an undefined quantity such as the
/// direction of a zero vector.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A sequence cannot be encoded within the configured length.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, catalogs or corpora.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace relmatch
