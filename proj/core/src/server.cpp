#include "fedsim/server.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "fedsim/error.hpp"
#include "fedsim/hetero.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void ClientManager::register_client(ClientProxyPtr proxy) {
  {
    std::lock_guard lock(mu_);
    const auto& id = proxy->client_id();
    if (clients_.contains(id)) {
      fail(ErrorCode::kDuplicateClientId, "client '" + id + "' is already registered");
    }
    clients_.emplace(id, std::move(proxy));
  }
  cv_.notify_all();
}

void ClientManager::unregister_client(const std::string& client_id) {
  std::lock_guard lock(mu_);
  clients_.erase(client_id);
}

std::vector<ClientProxyPtr> ClientManager::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<ClientProxyPtr> out;
  out.reserve(clients_.size());
  for (const auto& [id, proxy] : clients_) out.push_back(proxy);
  return out;
}

bool ClientManager::contains(const std::string& client_id) const {
  std::lock_guard lock(mu_);
  return clients_.contains(client_id);
}

std::size_t ClientManager::size() const {
  std::lock_guard lock(mu_);
  return clients_.size();
}

bool ClientManager::wait_for(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return clients_.size() >= n; });
}

std::vector<ClientProxyPtr> sample_clients(std::span<const ClientProxyPtr> available,
                                           std::size_t n, std::uint64_t seed) {
  if (n > available.size()) {
    fail(ErrorCode::kInsufficientClients, "requested " + std::to_string(n) + " of " +
                                              std::to_string(available.size()) +
                                              " available clients");
  }
  std::vector<ClientProxyPtr> pool(available.begin(), available.end());
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a->client_id() < b->client_id(); });
  if (n < pool.size()) {
    // Partial Fisher-Yates: the first n slots become a uniform n-subset.
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    }
    pool.resize(n);
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a->client_id() < b->client_id(); });
  }
  return pool;
}

std::vector<ClientProxyPtr> sample_clients(const ClientManager& manager, std::size_t n,
                                           std::uint64_t seed) {
  const auto all = manager.snapshot();
  return sample_clients(all, n, seed);
}

Server::Server(ClientManager& manager, const Strategy& strategy, ServerOptions options,
               Parameters initial)
    : manager_(manager),
      strategy_(strategy),
      options_(std::move(options)),
      global_(std::move(initial)) {}

ClientProxy::Timeout Server::fit_guard(const ClientProxy& proxy, const FitIns& ins) const {
  const auto& caps = proxy.capabilities();
  double expected_s = 0.0;
  const auto sps = caps.try_double(capability_key::kSecondsPerSample);
  const auto n = caps.try_double(capability_key::kTrainCount);
  const auto epochs = ins.config.try_double(config_key::kLocalEpochs);
  if (sps && n && epochs) expected_s = *sps * *n * *epochs;
  const auto guard = std::chrono::milliseconds(
      static_cast<std::int64_t>(std::ceil(options_.fit_guard_factor * expected_s * 1000.0)));
  return std::max(guard, options_.fit_guard_floor);
}

void Server::report_failure(std::uint32_t round, const std::string& id,
                            const std::string& why) {
  if (options_.on_failure) options_.on_failure(round, id, why);
}

RoundRecord Server::run_round(std::uint32_t round) {
  // Clients registering after this point join from the next round.
  const auto available = manager_.snapshot();
  if (available.size() < std::max<std::size_t>(options_.min_clients, 1)) {
    fail(ErrorCode::kInsufficientClients,
         std::to_string(available.size()) + " clients registered, need " +
             std::to_string(std::max<std::size_t>(options_.min_clients, 1)));
  }
  const auto want = options_.clients_per_round == 0 ? available.size()
                                                    : options_.clients_per_round;
  const auto selected = sample_clients(
      available, want, derive_seed(options_.sampling_seed, round, "sampling"));

  std::map<std::string, ClientProxyPtr> by_id;
  for (const auto& c : available) by_id.emplace(c->client_id(), c);

  auto instructions = strategy_.configure_fit(round, global_, selected);

  std::vector<std::future<FitRes>> pending;
  pending.reserve(instructions.size());
  for (const auto& ins : instructions) {
    auto proxy = by_id.at(ins.client_id);
    auto timeout = fit_guard(*proxy, ins.ins);
    pending.push_back(std::async(std::launch::async, [proxy, &ins, timeout] {
      return proxy->fit(ins.ins, timeout);
    }));
  }

  // Barrier: every selected client has answered or failed past this loop.
  RoundRecord record;
  record.round = round;
  std::vector<FitOutcome> results;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& id = instructions[i].client_id;
    try {
      auto res = pending[i].get();
      if (res.metrics.flag(metric_key::kFailed) || res.num_examples == 0) {
        failures.push_back(id);
        report_failure(round, id, "client reported a failed fit");
        continue;
      }
      if (!shape_compatible(res.parameters, global_)) {
        failures.push_back(id);
        report_failure(round, id, "returned parameters have the wrong shape");
        continue;
      }
      results.push_back({id, std::move(res.parameters), res.num_examples,
                         std::move(res.metrics)});
    } catch (const std::exception& e) {
      failures.push_back(id);
      report_failure(round, id, e.what());
    }
  }
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  std::sort(failures.begin(), failures.end());

  try {
    global_ = strategy_.aggregate_fit(round, results, failures);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInsufficientResults || e.code() == ErrorCode::kEmptyResults) {
      fail(ErrorCode::kRoundFailed, "round " + std::to_string(round) + ": " + e.what());
    }
    throw;
  }

  std::vector<double> times;
  std::vector<double> energies;
  for (const auto& r : results) {
    record.participating_clients.push_back(r.client_id);
    times.push_back(r.metrics.try_double(metric_key::kVirtualTime).value_or(0.0));
    energies.push_back(r.metrics.try_double(metric_key::kEnergy).value_or(0.0));
  }
  record.failed_clients = failures;
  record.round_virtual_time_s = round_time(times);
  record.round_energy_j = round_energy(energies);

  const auto eval_ins = strategy_.configure_evaluate(round, global_, available);
  std::vector<std::future<EvaluateRes>> evals;
  evals.reserve(eval_ins.size());
  for (const auto& ins : eval_ins) {
    auto proxy = by_id.at(ins.client_id);
    evals.push_back(std::async(std::launch::async, [proxy, &ins, this] {
      return proxy->evaluate(ins.ins, options_.fit_guard_floor);
    }));
  }
  std::vector<EvaluateOutcome> eval_results;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    try {
      auto res = evals[i].get();
      if (res.metrics.flag(metric_key::kFailed) || res.num_examples == 0) continue;
      eval_results.push_back({eval_ins[i].client_id, res.loss, res.num_examples,
                              std::move(res.metrics)});
    } catch (const std::exception&) {
      // Already reported through the fit path if the client is gone.
    }
  }
  if (eval_results.empty()) {
    fail(ErrorCode::kRoundFailed,
         "round " + std::to_string(round) + ": no client returned an evaluation");
  }
  const auto summary = strategy_.aggregate_evaluate(round, std::move(eval_results));
  record.global_loss = summary.loss;
  record.global_accuracy = summary.accuracy;

  cumulative_time_ += record.round_virtual_time_s;
  cumulative_energy_ += record.round_energy_j;
  record.cumulative_virtual_time_s = cumulative_time_;
  record.cumulative_energy_j = cumulative_energy_;
  if (options_.on_round) options_.on_round(record);
  return record;
}

FederationResult Server::run() {
  FederationResult out;
  out.rounds.reserve(options_.rounds);
  for (std::uint32_t r = 1; r <= options_.rounds; ++r) out.rounds.push_back(run_round(r));
  out.final_parameters = global_;
  return out;
}

FederationResult run_federation(ClientManager& manager, const Strategy& strategy,
                                const ServerOptions& options, Parameters initial) {
  Server server(manager, strategy, options, std::move(initial));
  return server.run();
}

std::size_t accept_clients(TcpListener& listener, ClientManager& manager, std::size_t count,
                           std::chrono::milliseconds timeout,
                           const std::function<void(const std::string&)>& log) {
  const auto deadline = Clock::now() + timeout;
  std::size_t registered = 0;
  while (registered < count) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) break;
    auto conn = listener.accept(left);
    if (!conn) break;
    try {
      auto identity = handshake_server(
          *conn, kHandshakeTimeout, [&](const ClientIdentity& id) -> std::optional<Refusal> {
            if (!manager.contains(id.client_id)) return std::nullopt;
            return Refusal{disconnect_reason::kDuplicateClientId,
                           ErrorCode::kDuplicateClientId,
                           "client '" + id.client_id + "' is already registered"};
          });
      auto proxy = std::make_shared<RemoteClientProxy>(
          identity.client_id, std::move(identity.capabilities), std::move(conn));
      try {
        manager.register_client(proxy);
      } catch (const Error& e) {
        if (log) log(e.what());
        proxy->disconnect(disconnect_reason::kDuplicateClientId);
        continue;
      }
      ++registered;
      if (log) log("registered client '" + identity.client_id + "'");
    } catch (const Error& e) {
      if (log) log(std::string("handshake failed: ") + e.what());
    }
  }
  return registered;
}

}  // namespace fedsim
