#pragma once

#include <stdexcept>
#include <string>

namespace artikin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value breaks a documented type invariant. `field()` holds the path of
/// the offending field, e.g. "gaussians[12].seg_logits".
class InvariantError : public Error {
 public:
  InvariantError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a function precondition (bad sizes, mask off the simplex).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient evaluation produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace artikin
