#include "pon/error.hpp"

namespace pon {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kHeightOutOfRange: return "HeightOutOfRange";
    case ErrorCode::kStaleRegistration: return "StaleRegistration";
    case ErrorCode::kNotRegistered: return "NotRegistered";
    case ErrorCode::kHeightMismatch: return "HeightMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidScenario: return "InvalidScenario";
    case ErrorCode::kNonPositiveDistance: return "NonPositiveDistance";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kMixedHeights: return "MixedHeights";
    case ErrorCode::kCertificateMismatch: return "CertificateMismatch";
    case ErrorCode::kLockHeld: return "LockHeld";
    case ErrorCode::kBlockRejected: return "BlockRejected";
  }
  return "Unknown";
}

}  // namespace pon
