#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "fedsim/client.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {

/// Server-side handle for one connected client. The FL loop talks only to
/// this interface, so in-process and TCP clients are indistinguishable to
/// it. Requests on one proxy are serialized.
class ClientProxy {
 public:
  using Timeout = std::optional<std::chrono::milliseconds>;

  ClientProxy(std::string client_id, ConfigMap capabilities)
      : client_id_(std::move(client_id)), capabilities_(std::move(capabilities)) {}
  virtual ~ClientProxy() = default;

  const std::string& client_id() const noexcept { return client_id_; }
  const ConfigMap& capabilities() const noexcept { return capabilities_; }

  Parameters get_parameters(Timeout timeout = std::nullopt);
  FitRes fit(const FitIns& ins, Timeout timeout = std::nullopt);
  EvaluateRes evaluate(const EvaluateIns& ins, Timeout timeout = std::nullopt);
  /// Ends the session; further requests fail.
  virtual void disconnect(std::uint8_t reason = disconnect_reason::kDone) { (void)reason; }

 protected:
  virtual Parameters do_get_parameters(Timeout timeout) = 0;
  virtual FitRes do_fit(const FitIns& ins, Timeout timeout) = 0;
  virtual EvaluateRes do_evaluate(const EvaluateIns& ins, Timeout timeout) = 0;

 private:
  std::string client_id_;
  ConfigMap capabilities_;
  std::mutex mu_;
};

/// Calls a Client object directly on the dispatching thread.
class LocalClientProxy : public ClientProxy {
 public:
  LocalClientProxy(std::string client_id, ConfigMap capabilities,
                   std::shared_ptr<Client> client)
      : ClientProxy(std::move(client_id), std::move(capabilities)),
        client_(std::move(client)) {}

 protected:
  Parameters do_get_parameters(Timeout) override { return client_->get_parameters(); }
  FitRes do_fit(const FitIns& ins, Timeout) override { return client_->fit(ins); }
  EvaluateRes do_evaluate(const EvaluateIns& ins, Timeout) override {
    return client_->evaluate(ins);
  }

 private:
  std::shared_ptr<Client> client_;
};

/// Speaks the frame protocol over a ByteChannel whose handshake is done.
/// Any transport or protocol error closes the channel; later requests fail
/// fast with kConnectionClosed.
class RemoteClientProxy : public ClientProxy {
 public:
  RemoteClientProxy(std::string client_id, ConfigMap capabilities,
                    std::unique_ptr<ByteChannel> channel)
      : ClientProxy(std::move(client_id), std::move(capabilities)),
        channel_(std::move(channel)) {}
  ~RemoteClientProxy() override;

  void disconnect(std::uint8_t reason = disconnect_reason::kDone) override;
  bool connected() const noexcept { return channel_ != nullptr; }

 protected:
  Parameters do_get_parameters(Timeout timeout) override;
  FitRes do_fit(const FitIns& ins, Timeout timeout) override;
  EvaluateRes do_evaluate(const EvaluateIns& ins, Timeout timeout) override;

 private:
  Message round_trip(const Message& request, MessageTag expected, Timeout timeout);

  std::unique_ptr<ByteChannel> channel_;
};

}  // namespace fedsim
