#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace projmc2 {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  Numerical,
  Io,
  Parse,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::DimensionMismatch: return "E_DIMENSION";
    case ErrorCode::Numerical: return "E_NUMERICAL";
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Config: return "E_CONFIG";
  }
  return "E_UNKNOWN";
}

/// Library-wide exception; `code()` is stable and machine-readable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace projmc2
