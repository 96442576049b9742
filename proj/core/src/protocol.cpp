#include "fedsim/protocol.hpp"

#include <array>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

MessageTag tag_of(const Message& msg) {
  return std::visit(
      Overloaded{
          [](const Hello&) { return MessageTag::kHello; },
          [](const HelloAck&) { return MessageTag::kHelloAck; },
          [](const GetParametersIns&) { return MessageTag::kGetParametersIns; },
          [](const GetParametersRes&) { return MessageTag::kGetParametersRes; },
          [](const FitIns&) { return MessageTag::kFitIns; },
          [](const FitRes&) { return MessageTag::kFitRes; },
          [](const EvaluateIns&) { return MessageTag::kEvaluateIns; },
          [](const EvaluateRes&) { return MessageTag::kEvaluateRes; },
          [](const Disconnect&) { return MessageTag::kDisconnect; },
      },
      msg);
}

std::string_view message_name(const Message& msg) {
  static constexpr std::array<std::string_view, 9> kNames{
      "Hello",  "HelloAck",    "GetParametersIns", "GetParametersRes", "FitIns",
      "FitRes", "EvaluateIns", "EvaluateRes",      "Disconnect"};
  return kNames[msg.index()];
}

void validate_message(const Message& msg) {
  if (const auto* res = std::get_if<FitRes>(&msg)) {
    if (res->num_examples == 0 && !res->metrics.flag("failed")) {
      fail(ErrorCode::kProtocolViolation,
           "FitRes with zero examples must carry failed=true");
    }
  } else if (const auto* eval = std::get_if<EvaluateRes>(&msg)) {
    if (!std::isfinite(eval->loss)) {
      fail(ErrorCode::kProtocolViolation, "EvaluateRes loss is not finite");
    }
  }
}

Bytes encode_payload(const Message& msg) {
  ByteWriter w;
  std::visit(Overloaded{
                 [&](const Hello& m) {
                   w.short_string(m.client_id);
                   encode_config(m.capabilities, w);
                 },
                 [](const HelloAck&) {},
                 [](const GetParametersIns&) {},
                 [&](const GetParametersRes& m) { encode_parameters(m.parameters, w); },
                 [&](const FitIns& m) {
                   encode_parameters(m.parameters, w);
                   encode_config(m.config, w);
                 },
                 [&](const FitRes& m) {
                   encode_parameters(m.parameters, w);
                   w.u64(m.num_examples);
                   encode_config(m.metrics, w);
                 },
                 [&](const EvaluateIns& m) {
                   encode_parameters(m.parameters, w);
                   encode_config(m.config, w);
                 },
                 [&](const EvaluateRes& m) {
                   w.f64(m.loss);
                   w.u64(m.num_examples);
                   encode_config(m.metrics, w);
                 },
                 [&](const Disconnect& m) { w.u8(m.reason); },
             },
             msg);
  return std::move(w).take();
}

namespace {

Message decode_body(MessageTag tag, ByteReader& r) {
  switch (tag) {
    case MessageTag::kHello: {
      Hello m;
      m.client_id = r.short_string();
      m.capabilities = decode_config(r);
      return m;
    }
    case MessageTag::kHelloAck:
      return HelloAck{};
    case MessageTag::kGetParametersIns:
      return GetParametersIns{};
    case MessageTag::kGetParametersRes:
      return GetParametersRes{decode_parameters(r)};
    case MessageTag::kFitIns: {
      FitIns m;
      m.parameters = decode_parameters(r);
      m.config = decode_config(r);
      return m;
    }
    case MessageTag::kFitRes: {
      FitRes m;
      m.parameters = decode_parameters(r);
      m.num_examples = r.u64();
      m.metrics = decode_config(r);
      return m;
    }
    case MessageTag::kEvaluateIns: {
      EvaluateIns m;
      m.parameters = decode_parameters(r);
      m.config = decode_config(r);
      return m;
    }
    case MessageTag::kEvaluateRes: {
      EvaluateRes m;
      m.loss = r.f64();
      m.num_examples = r.u64();
      m.metrics = decode_config(r);
      return m;
    }
    case MessageTag::kDisconnect:
      return Disconnect{r.u8()};
  }
  fail(ErrorCode::kUnknownTypeTag, "unreachable");
}

bool known_tag(std::uint8_t tag) {
  switch (static_cast<MessageTag>(tag)) {
    case MessageTag::kHello:
    case MessageTag::kHelloAck:
    case MessageTag::kGetParametersIns:
    case MessageTag::kGetParametersRes:
    case MessageTag::kFitIns:
    case MessageTag::kFitRes:
    case MessageTag::kEvaluateIns:
    case MessageTag::kEvaluateRes:
    case MessageTag::kDisconnect:
      return true;
  }
  return false;
}

}  // namespace

Message decode_payload(std::uint8_t tag, ByteView payload) {
  if (!known_tag(tag)) {
    fail(ErrorCode::kUnknownTypeTag, "type tag " + std::to_string(tag));
  }
  Message msg;
  ByteReader r(payload);
  try {
    msg = decode_body(static_cast<MessageTag>(tag), r);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedPayload, e.what());
  }
  if (!r.at_end()) {
    fail(ErrorCode::kMalformedPayload,
         std::to_string(r.remaining()) + " trailing payload bytes");
  }
  try {
    validate_message(msg);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedPayload, e.what());
  }
  return msg;
}

Bytes write_frame(const Message& msg) {
  validate_message(msg);
  const auto payload = encode_payload(msg);
  if (payload.size() + 1 > kMaxFrameLength) {
    fail(ErrorCode::kOversizeMessage,
         std::string(message_name(msg)) + " payload of " +
             std::to_string(payload.size()) + " bytes exceeds the frame cap");
  }
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size() + 1));
  w.u8(static_cast<std::uint8_t>(tag_of(msg)));
  w.raw(payload);
  return std::move(w).take();
}

void write_frame(ByteChannel& out, const Message& msg) {
  out.write_all(write_frame(msg));
}

namespace {

// Returns the number of bytes read before EOF.
std::size_t read_exact(ByteSource& in, std::span<std::uint8_t> buf) {
  std::size_t got = 0;
  while (got < buf.size()) {
    const auto n = in.read_some(buf.subspan(got));
    if (n == 0) break;
    got += n;
  }
  return got;
}

}  // namespace

Message read_frame(ByteSource& in) {
  std::array<std::uint8_t, 4> header{};
  const auto got = read_exact(in, header);
  if (got == 0) fail(ErrorCode::kConnectionClosed, "EOF at frame boundary");
  if (got < header.size()) fail(ErrorCode::kTruncatedFrame, "EOF inside length prefix");
  const std::uint32_t length = (std::uint32_t{header[0]} << 24) |
                               (std::uint32_t{header[1]} << 16) |
                               (std::uint32_t{header[2]} << 8) | header[3];
  if (length == 0) fail(ErrorCode::kMalformedPayload, "zero-length frame has no type tag");
  if (length > kMaxFrameLength) {
    fail(ErrorCode::kMalformedPayload,
         "frame length " + std::to_string(length) + " exceeds the cap");
  }
  Bytes body(length);
  if (read_exact(in, body) < length) {
    fail(ErrorCode::kTruncatedFrame, "EOF inside a " + std::to_string(length) + "-byte frame");
  }
  return decode_payload(body[0], ByteView(body).subspan(1));
}

namespace {

// RAII deadline scoped to the handshake.
class DeadlineGuard {
 public:
  DeadlineGuard(ByteSource& src, std::chrono::milliseconds timeout) : src_(src) {
    src_.set_read_deadline(Clock::now() + timeout);
  }
  ~DeadlineGuard() { src_.set_read_deadline(std::nullopt); }

 private:
  ByteSource& src_;
};

Message read_handshake_frame(ByteChannel& conn, std::chrono::milliseconds timeout) {
  DeadlineGuard guard(conn, timeout);
  try {
    return read_frame(conn);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTimeout) fail(ErrorCode::kHandshakeTimeout, e.what());
    throw;
  }
}

}  // namespace

ClientIdentity handshake_server(ByteChannel& conn, std::chrono::milliseconds timeout,
                                const Admission& admit) {
  auto msg = read_handshake_frame(conn, timeout);
  auto* hello = std::get_if<Hello>(&msg);
  if (hello == nullptr) {
    fail(ErrorCode::kProtocolViolation,
         "expected Hello, got " + std::string(message_name(msg)));
  }
  ClientIdentity id{std::move(hello->client_id), std::move(hello->capabilities)};
  if (admit) {
    if (const auto refusal = admit(id)) {
      write_frame(conn, Disconnect{refusal->reason});
      conn.close();
      fail(refusal->code, refusal->message);
    }
  }
  write_frame(conn, HelloAck{});
  return id;
}

void handshake_client(ByteChannel& conn, const std::string& client_id,
                      const ConfigMap& capabilities, std::chrono::milliseconds timeout) {
  write_frame(conn, Hello{client_id, capabilities});
  auto msg = read_handshake_frame(conn, timeout);
  if (std::holds_alternative<HelloAck>(msg)) return;
  if (const auto* bye = std::get_if<Disconnect>(&msg)) {
    fail(ErrorCode::kConnectionClosed,
         "server refused handshake, reason " + std::to_string(bye->reason));
  }
  fail(ErrorCode::kProtocolViolation,
       "expected HelloAck, got " + std::string(message_name(msg)));
}

}  // namespace fedsim
