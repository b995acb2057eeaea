#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uq {

enum class ErrorKind {
  ConfigError,
  TaskMismatch,
  DegenerateData,
  DimensionMismatch,
  NotPositiveDefinite,
  NonFiniteObjective,
  EmptyInput,
  TooFewSamples,
  GridExhausted,
  IoError,
  SchemaVersionMismatch,
  CorruptPayload,
  SingularHessian,
  AllZeroWidth,
  TargetUnreachable,
  OneClassOnly,
  NotBinary,
  ModeTaskMismatch,
  DegenerateDistribution,
  UnsupportedKind,
  DataError,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so that
// the C API and the CLI can map it onto a status/exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace uq
