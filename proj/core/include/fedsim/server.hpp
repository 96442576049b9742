#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fedsim/client_proxy.hpp"
#include "fedsim/strategy.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {

/// Registry of connected clients; safe for concurrent registration and
/// snapshots.
class ClientManager {
 public:
  /// Throws kDuplicateClientId.
  void register_client(ClientProxyPtr proxy);
  void unregister_client(const std::string& client_id);

  /// Registered clients sorted by id.
  std::vector<ClientProxyPtr> snapshot() const;
  bool contains(const std::string& client_id) const;
  std::size_t size() const;
  /// Blocks until at least n clients are registered or the timeout passes.
  bool wait_for(std::size_t n, std::chrono::milliseconds timeout) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, ClientProxyPtr> clients_;
};

/// Seeded uniform choice of n distinct clients from `available`, returned
/// sorted by id. Deterministic in (ids, n, seed). Throws
/// kInsufficientClients.
std::vector<ClientProxyPtr> sample_clients(std::span<const ClientProxyPtr> available,
                                           std::size_t n, std::uint64_t seed);
std::vector<ClientProxyPtr> sample_clients(const ClientManager& manager, std::size_t n,
                                           std::uint64_t seed);

struct RoundRecord {
  std::uint32_t round = 0;
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  double round_virtual_time_s = 0.0;
  double round_energy_j = 0.0;
  double cumulative_virtual_time_s = 0.0;
  double cumulative_energy_j = 0.0;
  std::vector<std::string> participating_clients;
  std::vector<std::string> failed_clients;

  bool operator==(const RoundRecord&) const = default;
};

struct FederationResult {
  Parameters final_parameters;
  std::vector<RoundRecord> rounds;
};

struct ServerOptions {
  std::uint32_t rounds = 1;
  std::size_t clients_per_round = 0;  // 0 selects every registered client
  std::size_t min_clients = 1;        // registered clients required per round
  std::uint64_t sampling_seed = 0;
  /// Wall-clock guard on remote fit calls: factor x the expected virtual
  /// time announced by the client, never below the floor. Simulated results
  /// do not depend on it.
  double fit_guard_factor = 10.0;
  std::chrono::milliseconds fit_guard_floor{std::chrono::seconds(30)};
  std::function<void(const RoundRecord&)> on_round;
  std::function<void(std::uint32_t round, const std::string& client_id,
                     const std::string& reason)>
      on_failure;
};

/// The FL loop. Every decision is delegated to the Strategy; the server
/// only samples, dispatches, waits and records.
class Server {
 public:
  Server(ClientManager& manager, const Strategy& strategy, ServerOptions options,
         Parameters initial);

  /// One synchronous round; replaces the global parameters. Throws
  /// kRoundFailed, kInsufficientClients.
  RoundRecord run_round(std::uint32_t round);
  FederationResult run();

  const Parameters& global() const noexcept { return global_; }

 private:
  ClientProxy::Timeout fit_guard(const ClientProxy& proxy, const FitIns& ins) const;
  void report_failure(std::uint32_t round, const std::string& id, const std::string& why);

  ClientManager& manager_;
  const Strategy& strategy_;
  ServerOptions options_;
  Parameters global_;
  double cumulative_time_ = 0.0;
  double cumulative_energy_ = 0.0;
};

FederationResult run_federation(ClientManager& manager, const Strategy& strategy,
                                const ServerOptions& options, Parameters initial);

/// Accepts TCP connections, handshakes and registers clients until `count`
/// are registered or `timeout` passes. Duplicate ids are refused with a
/// Disconnect frame. Returns the number registered.
std::size_t accept_clients(TcpListener& listener, ClientManager& manager, std::size_t count,
                           std::chrono::milliseconds timeout,
                           const std::function<void(const std::string&)>& log = {});

}  // namespace fedsim
