#include "fedsim/error.hpp"

namespace fedsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kTruncatedInput: return "TruncatedInput";
    case ErrorCode::kMalformedEncoding: return "MalformedEncoding";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kUnknownValueTag: return "UnknownValueTag";
    case ErrorCode::kOversizeMessage: return "OversizeMessage";
    case ErrorCode::kConnectionClosed: return "ConnectionClosed";
    case ErrorCode::kTruncatedFrame: return "TruncatedFrame";
    case ErrorCode::kUnknownTypeTag: return "UnknownTypeTag";
    case ErrorCode::kMalformedPayload: return "MalformedPayload";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kHandshakeTimeout: return "HandshakeTimeout";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDuplicateClientId: return "DuplicateClientId";
    case ErrorCode::kInsufficientClients: return "InsufficientClients";
    case ErrorCode::kRoundFailed: return "RoundFailed";
    case ErrorCode::kEmptyResults: return "EmptyResults";
    case ErrorCode::kZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::kInsufficientResults: return "InsufficientResults";
    case ErrorCode::kUnknownProcessorClass: return "UnknownProcessorClass";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kEmptyShard: return "EmptyShard";
    case ErrorCode::kMissingConfigKey: return "MissingConfigKey";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kTooManyShards: return "TooManyShards";
    case ErrorCode::kEmptyList: return "EmptyList";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kSpawnError: return "SpawnError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fedsim
