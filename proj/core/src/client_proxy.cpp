#include "fedsim/client_proxy.hpp"

#include "fedsim/error.hpp"

namespace fedsim {

Parameters ClientProxy::get_parameters(Timeout timeout) {
  std::lock_guard lock(mu_);
  return do_get_parameters(timeout);
}

FitRes ClientProxy::fit(const FitIns& ins, Timeout timeout) {
  std::lock_guard lock(mu_);
  return do_fit(ins, timeout);
}

EvaluateRes ClientProxy::evaluate(const EvaluateIns& ins, Timeout timeout) {
  std::lock_guard lock(mu_);
  return do_evaluate(ins, timeout);
}

RemoteClientProxy::~RemoteClientProxy() {
  if (channel_) channel_->close();
}

void RemoteClientProxy::disconnect(std::uint8_t reason) {
  if (!channel_) return;
  try {
    write_frame(*channel_, Disconnect{reason});
  } catch (const Error&) {
    // Peer already gone.
  }
  channel_->close();
  channel_.reset();
}

Message RemoteClientProxy::round_trip(const Message& request, MessageTag expected,
                                      Timeout timeout) {
  if (!channel_) {
    fail(ErrorCode::kConnectionClosed, "client '" + client_id() + "' is disconnected");
  }
  try {
    write_frame(*channel_, request);
    channel_->set_read_deadline(timeout ? std::optional(Clock::now() + *timeout)
                                        : std::nullopt);
    auto reply = read_frame(*channel_);
    channel_->set_read_deadline(std::nullopt);
    if (tag_of(reply) != expected) {
      fail(ErrorCode::kProtocolViolation, "client '" + client_id() + "' answered " +
                                              std::string(message_name(request)) +
                                              " with " + std::string(message_name(reply)));
    }
    return reply;
  } catch (const Error&) {
    channel_->close();
    channel_.reset();
    throw;
  }
}

Parameters RemoteClientProxy::do_get_parameters(Timeout timeout) {
  auto reply = round_trip(GetParametersIns{}, MessageTag::kGetParametersRes, timeout);
  return std::get<GetParametersRes>(std::move(reply)).parameters;
}

FitRes RemoteClientProxy::do_fit(const FitIns& ins, Timeout timeout) {
  return std::get<FitRes>(round_trip(ins, MessageTag::kFitRes, timeout));
}

EvaluateRes RemoteClientProxy::do_evaluate(const EvaluateIns& ins, Timeout timeout) {
  return std::get<EvaluateRes>(round_trip(ins, MessageTag::kEvaluateRes, timeout));
}

}  // namespace fedsim
