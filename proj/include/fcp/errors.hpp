#pragma once

#include <stdexcept>
#include <string>

namespace fcp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf reached a place that requires finite values, or a computation
/// had no defined result (degenerate composition row, constant sequence).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The decision row of a composition trace is identically zero.
class DegenerateAttributionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A document (model JSON, CSV, schema) could not be read.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A well-formed value violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcp
