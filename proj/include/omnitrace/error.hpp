#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omnitrace {

// Stable codes; the CLI maps every Error to exit status 1.
enum class ErrorCode {
  kParse = 1,
  kUnsupportedVersion = 2,
  kValidation = 3,
  kGold = 4,
  kConfig = 5,
  kInvalidArgument = 6,
  kIo = 7,
};

inline const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kGold: return "gold";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }

  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// Malformed input at a known line of a line-delimited stream (1-based).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline Error validation_error(const std::string& message) {
  return Error(ErrorCode::kValidation, message);
}

inline Error invalid_argument(const std::string& message) {
  return Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace omnitrace
