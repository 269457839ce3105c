// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace idpoe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scalar argument (range, ordering, group order, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Tensor or sequence shape does not match the expected layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Value-level validation failure (out-of-bounds coordinates, NaN, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (representation mismatch, empty dataset, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A group element that cannot act exactly on the pixel grid.
class UnsupportedElementError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or diverging numerics.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dataset or checkpoint I/O problems: missing files, checksum mismatch,
/// malformed manifest.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace idpoe
