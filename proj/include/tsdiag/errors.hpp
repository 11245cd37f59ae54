#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsdiag {

/// Base class for every error thrown by the toolkit.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad lag, bad range, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

/// The operation needs at least one (or more) non-missing observations.
struct EmptySeries : Error {
  using Error::Error;
};

/// The series carries no usable variation (constant input, zero variance).
struct DegenerateSeries : Error {
  using Error::Error;
};

/// The input shape is valid but not supported (e.g. missing values where a
/// complete series is required).
struct UnsupportedInput : Error {
  using Error::Error;
};

/// Model parameters violate causality/invertibility or variance positivity.
struct InvalidModel : Error {
  using Error::Error;
};

/// Order selection exhausted the whole grid without a single successful fit.
struct NoModel : Error {
  using Error::Error;
};

/// A panel column cannot be preprocessed (all missing, or zero variance
/// under standardization).
struct DegenerateColumn : Error {
  using Error::Error;
};

/// Regression design matrix is rank deficient; `columns` names the columns
/// that were dropped by the pivoted factorization.
struct CollinearityError : Error {
  std::vector<std::string> columns;
  CollinearityError(const std::string& msg, std::vector<std::string> cols)
      : Error(msg), columns(std::move(cols)) {}
};

/// A prediction requires a covariate value that is not available.
struct CoverageError : Error {
  int time = 0;
  int offset = 0;
  CoverageError(const std::string& msg, int time_, int offset_)
      : Error(msg), time(time_), offset(offset_) {}
};

/// CSV input could not be parsed; the message carries file/row/column.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace tsdiag
