#pragma once

#include <stdexcept>
#include <string>

namespace pnr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented precondition or type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file or stream could not be parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a result.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NoRootError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A ratio estimator had a zero denominator (or zero numerator where that
/// would be indistinguishable from "no data"). `quantity` names the count.
class UndefinedRatioError : public NumericError {
 public:
  explicit UndefinedRatioError(std::string quantity)
      : NumericError("undefined ratio: " + quantity + " is zero"), quantity_(std::move(quantity)) {}

  const std::string& quantity() const noexcept { return quantity_; }

 private:
  std::string quantity_;
};

}  // namespace pnr
