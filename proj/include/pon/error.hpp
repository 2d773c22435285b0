#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pon {

enum class ErrorCode {
  kInvalidArgument,
  kHeightOutOfRange,
  kStaleRegistration,
  kNotRegistered,
  kHeightMismatch,
  kIoError,
  kParseError,
  kInvalidScenario,
  kNonPositiveDistance,
  kOutOfBounds,
  kMixedHeights,
  kCertificateMismatch,
  kLockHeld,
  kBlockRejected,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// `line` is 1-based; 0 means the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(ErrorCode::kParseError, what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidScenario : public Error {
 public:
  InvalidScenario(std::string field, const std::string& what)
      : Error(ErrorCode::kInvalidScenario, what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pon
