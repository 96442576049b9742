#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedsim {

enum class ErrorCode {
  // tensor-core
  kShapeMismatch,
  kNonFiniteValue,
  kTruncatedInput,
  kMalformedEncoding,
  kDuplicateKey,
  kUnknownValueTag,
  // protocol / transport
  kOversizeMessage,
  kConnectionClosed,
  kTruncatedFrame,
  kUnknownTypeTag,
  kMalformedPayload,
  kProtocolViolation,
  kHandshakeTimeout,
  kTimeout,
  kIoError,
  // server / strategy
  kDuplicateClientId,
  kInsufficientClients,
  kRoundFailed,
  kEmptyResults,
  kZeroTotalWeight,
  kInsufficientResults,
  kUnknownProcessorClass,
  // client runtime / simulation
  kLabelOutOfRange,
  kEmptyShard,
  kMissingConfigKey,
  kInvalidSpec,
  kTooManyShards,
  kEmptyList,
  // harness
  kParseError,
  kValidationError,
  kSpawnError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above, so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace fedsim
