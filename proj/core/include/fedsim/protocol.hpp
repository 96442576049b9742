#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "fedsim/codec.hpp"
#include "fedsim/error.hpp"
#include "fedsim/tensor.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {

struct Hello {
  std::string client_id;
  ConfigMap capabilities;
  bool operator==(const Hello&) const = default;
};
struct HelloAck {
  bool operator==(const HelloAck&) const = default;
};
struct GetParametersIns {
  bool operator==(const GetParametersIns&) const = default;
};
struct GetParametersRes {
  Parameters parameters;
  bool operator==(const GetParametersRes&) const = default;
};
struct FitIns {
  Parameters parameters;
  ConfigMap config;
  bool operator==(const FitIns&) const = default;
};
/// num_examples == 0 is only legal alongside metrics {"failed": true}.
struct FitRes {
  Parameters parameters;
  std::uint64_t num_examples = 0;
  ConfigMap metrics;
  bool operator==(const FitRes&) const = default;
};
struct EvaluateIns {
  Parameters parameters;
  ConfigMap config;
  bool operator==(const EvaluateIns&) const = default;
};
struct EvaluateRes {
  double loss = 0.0;
  std::uint64_t num_examples = 0;
  ConfigMap metrics;
  bool operator==(const EvaluateRes&) const = default;
};
struct Disconnect {
  std::uint8_t reason = 0;
  bool operator==(const Disconnect&) const = default;
};

using Message = std::variant<Hello, HelloAck, GetParametersIns, GetParametersRes,
                             FitIns, FitRes, EvaluateIns, EvaluateRes, Disconnect>;

enum class MessageTag : std::uint8_t {
  kHello = 0x01,
  kHelloAck = 0x02,
  kGetParametersIns = 0x10,
  kGetParametersRes = 0x11,
  kFitIns = 0x12,
  kFitRes = 0x13,
  kEvaluateIns = 0x14,
  kEvaluateRes = 0x15,
  kDisconnect = 0x20,
};

namespace disconnect_reason {
inline constexpr std::uint8_t kDone = 0;
inline constexpr std::uint8_t kDuplicateClientId = 1;
inline constexpr std::uint8_t kProtocolViolation = 2;
}  // namespace disconnect_reason

/// Length field cap: bytes following the u32 length, tag included.
inline constexpr std::uint32_t kMaxFrameLength = 64u << 20;

MessageTag tag_of(const Message& msg);
std::string_view message_name(const Message& msg);

/// Checks the message-level invariants (finite EvaluateRes.loss, FitRes
/// zero-example rule). Throws kProtocolViolation.
void validate_message(const Message& msg);

Bytes encode_payload(const Message& msg);
/// Throws kUnknownTypeTag or kMalformedPayload.
Message decode_payload(std::uint8_t tag, ByteView payload);

/// length(u32 BE) . tag(u8) . payload. Throws kOversizeMessage.
Bytes write_frame(const Message& msg);
void write_frame(ByteChannel& out, const Message& msg);

/// Reads exactly one frame. kConnectionClosed on EOF at a frame boundary,
/// kTruncatedFrame on EOF inside one.
Message read_frame(ByteSource& in);

inline constexpr std::chrono::seconds kHandshakeTimeout{10};

struct ClientIdentity {
  std::string client_id;
  ConfigMap capabilities;
};

struct Refusal {
  std::uint8_t reason = disconnect_reason::kProtocolViolation;
  ErrorCode code = ErrorCode::kProtocolViolation;
  std::string message;
};

/// Decides on a Hello before it is acknowledged; a Refusal is answered with
/// Disconnect and raised as Error(code, message).
using Admission = std::function<std::optional<Refusal>(const ClientIdentity&)>;

/// Reads Hello, answers HelloAck.
ClientIdentity handshake_server(ByteChannel& conn,
                                std::chrono::milliseconds timeout = kHandshakeTimeout,
                                const Admission& admit = {});

/// Sends Hello, awaits HelloAck.
void handshake_client(ByteChannel& conn, const std::string& client_id,
                      const ConfigMap& capabilities,
                      std::chrono::milliseconds timeout = kHandshakeTimeout);

}  // namespace fedsim
