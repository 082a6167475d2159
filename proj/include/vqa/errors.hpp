#pragma once

#include <stdexcept>
#include <string>

namespace vqa {

// Root of every error the library raises. The CLI maps the subclasses onto
// exit codes: config/shape/contract -> 1, data -> 2, numeric -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operand shapes disagree. The message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition that is not about shapes (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

enum class FormatFault {
  kBadMagic,
  kTruncated,
  kOrdinalOutOfRange,
  kInconsistentWidth,
  kBadNumber,
  kMalformedRecord,
  kMissingField,
  kUnsupportedVersion,
};

class FormatError : public DataError {
 public:
  FormatError(FormatFault fault, const std::string& what) : DataError(what), fault_(fault) {}
  FormatFault fault() const noexcept { return fault_; }

 private:
  FormatFault fault_;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A weight-normalized layer has a direction row with (near) zero norm.
class DegenerateParameterError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace vqa
