#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tutor {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kUnavailable,
  kValidation,
  kUnauthorized,
  kForbidden,
  kIo,
  kInternal,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kUnavailable: return "not_available";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kUnauthorized: return "unauthorized";
    case ErrorCode::kForbidden: return "forbidden";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

// Domain error carried across module boundaries. The message is the
// user-facing text ("empty corpus", "degenerate vector", ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tutor
