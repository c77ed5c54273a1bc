#pragma once

#include <stdexcept>
#include <string>

namespace cngp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes or dimensions of the arguments do not agree.
class DimensionMismatch : public Error {
public:
  using Error::Error;
};

/// A parameter or argument lies outside its documented domain.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Factorization failed even after the jitter schedule was exhausted.
class NotPositiveDefinite : public Error {
public:
  using Error::Error;
};

/// An integrand or objective produced a non-finite value.
class EvaluationError : public Error {
public:
  using Error::Error;
};

/// Optimization could not make progress because gradients or the
/// objective stayed non-finite.
class NonFiniteObjective : public Error {
public:
  using Error::Error;
};

/// Problems with input data: missing columns, malformed files, too few rows.
class DataError : public Error {
public:
  using Error::Error;
};

class DataTooSmall : public DataError {
public:
  using DataError::DataError;
};

class MissingColumn : public DataError {
public:
  using DataError::DataError;
};

/// Raised with the 1-based line number of the offending row.
class MalformedCsv : public DataError {
public:
  MalformedCsv(const std::string &what, long line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

class EmptyAfterFiltering : public DataError {
public:
  using DataError::DataError;
};

class EmptyAfterWindowing : public DataError {
public:
  using DataError::DataError;
};

class ConstantColumn : public DataError {
public:
  using DataError::DataError;
};

class NonMonotonicTimestamps : public DataError {
public:
  using DataError::DataError;
};

/// Feature columns of a dataset do not match what a model was trained on.
class FeatureMismatch : public DataError {
public:
  using DataError::DataError;
};

} // namespace cngp
