// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace setsdb {

enum class ErrorCode {
  // store
  kInvalidName,
  kDuplicateDatabase,
  kUnknownDatabase,
  kUnknownSeries,
  kKindMismatch,
  kInvalidArgument,
  kParseError,
  kIoError,
  // ontology
  kSchemaError,
  kCycleError,
  kDanglingReference,
  kExpressionParseError,
  kUnknownMetric,
  kUnknownEntity,
  kUnknownUnit,
  kUnitMismatch,
  // expressions
  kUnboundMetric,
  kDivisionByZero,
  kUnsupportedHere,
  // semantics
  kUnresolvedReference,
  kDuplicateStream,
  kUnknownStream,
  // reasoning / similarity / frontend
  kUnderivable,
  kNoUsableAttributes,
  kQueryParseError,
};

std::string_view error_code_name(ErrorCode code);

// All user-facing failures raised by the library carry an ErrorCode. Anything
// else escaping the library is an internal error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures that can point at a character offset in the input.
class PositionedError : public Error {
 public:
  PositionedError(ErrorCode code, std::size_t position, const std::string& message)
      : Error(code, message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace setsdb
