// fedsim: run federated experiments, sweeps, a standalone server or client.

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/error.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/hetero.hpp"
#include "fedsim/server.hpp"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

void log_stderr(const std::string& line) { std::cerr << "[fedsim] " << line << '\n'; }

fs::path self_executable() {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::path() : p;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::kValidationError, "bad sweep value '" + item + "'");
    }
  }
  return out;
}

void print_final(const MetricsTable& t) {
  if (t.rows.empty()) {
    std::cout << "no rounds executed\n";
    return;
  }
  const auto& last = t.rows.back();
  std::cout << "rounds=" << t.rows.size() << " accuracy=" << last.global_accuracy
            << " loss=" << last.global_loss
            << " time_min=" << last.cumulative_virtual_time_s / 60.0
            << " energy_kJ=" << last.cumulative_energy_j / 1000.0 << '\n';
}

// Dies like a killed device once `fits` fit requests have been answered.
class CrashAfterFits : public Client {
 public:
  CrashAfterFits(Client& inner, std::uint32_t fits) : inner_(inner), remaining_(fits) {}
  Parameters get_parameters() override { return inner_.get_parameters(); }
  FitRes fit(const FitIns& ins) override {
    if (remaining_ == 0) ::kill(::getpid(), SIGKILL);
    --remaining_;
    return inner_.fit(ins);
  }
  EvaluateRes evaluate(const EvaluateIns& ins) override { return inner_.evaluate(ins); }

 private:
  Client& inner_;
  std::uint32_t remaining_;
};

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config_file(config_path);
  RunOptions opt;
  opt.client_executable = self_executable();
  opt.log = log_stderr;
  const auto result = run_experiment(cfg, opt);
  fs::create_directories(out_dir);
  write_metrics(result.metrics, fs::path(out_dir) / "metrics.csv");
  print_final(result.metrics);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& factor,
              const std::string& values_text, const std::string& out_dir) {
  const auto cfg = load_config_file(config_path);
  const auto spec = parse_sweep_factor(factor);
  const auto values = parse_values(values_text);
  RunOptions opt;
  opt.client_executable = self_executable();
  opt.log = log_stderr;
  const auto entries = sweep(cfg, spec, values, opt);
  fs::create_directories(out_dir);
  bool any_failed = false;
  for (const auto& e : entries) {
    if (!e.result) {
      any_failed = true;
      continue;
    }
    auto name = factor;
    std::replace(name.begin(), name.end(), ':', '_');
    write_metrics(e.result->metrics,
                  fs::path(out_dir) / (name + "_" + format_double(e.value) + ".csv"));
  }
  std::ofstream(fs::path(out_dir) / "summary.csv") << format_sweep_summary_csv(spec, entries);
  std::cout << format_sweep_summary_table(spec, entries);
  return any_failed ? 1 : 0;
}

int cmd_serve(const std::string& bind, std::uint32_t rounds, std::size_t min_clients,
              const std::string& strategy, const std::string& config_path,
              const std::string& out) {
  auto cfg = config_path.empty() ? ExperimentConfig{} : load_config_file(config_path);
  if (!strategy.empty()) {
    if (strategy != "fedavg" && strategy != "deadline") {
      fail(ErrorCode::kValidationError, "--strategy must be fedavg or deadline");
    }
    cfg.strategy.type = strategy;
  }
  cfg.rounds = rounds;
  const auto strat = make_strategy(cfg);

  TcpListener listener(parse_endpoint(bind));
  log_stderr("listening on port " + std::to_string(listener.port()) + ", waiting for " +
             std::to_string(min_clients) + " clients");
  ClientManager manager;
  const auto n = accept_clients(listener, manager, min_clients, std::chrono::hours(24), log_stderr);
  if (n < min_clients) fail(ErrorCode::kInsufficientClients, "not enough clients connected");

  ServerOptions so;
  so.rounds = rounds;
  so.min_clients = min_clients;
  so.clients_per_round = config_path.empty() ? 0 : std::min(cfg.clients_per_round, n);
  so.sampling_seed = cfg.seeds.sampling;
  so.on_failure = [](std::uint32_t round, const std::string& id, const std::string& why) {
    log_stderr("round " + std::to_string(round) + ": client '" + id + "' failed: " + why);
  };
  so.on_round = [](const RoundRecord& r) {
    log_stderr("round " + std::to_string(r.round) + " accuracy=" +
               format_double(r.global_accuracy) + " loss=" + format_double(r.global_loss));
  };
  MetricsTable table;
  table.config_hash = config_hash(cfg);
  table.mode = RunMode::kTcp;
  try {
    table.rows = run_federation(manager, *strat, so, initial_parameters(cfg)).rounds;
  } catch (...) {
    for (const auto& p : manager.snapshot()) p->disconnect();
    throw;
  }
  for (const auto& p : manager.snapshot()) p->disconnect();
  if (out.empty()) {
    std::cout << format_metrics_csv(table);
  } else {
    write_metrics(table, out);
  }
  return 0;
}

int cmd_client(const std::string& server, const std::string& client_id,
               const std::string& shard_path, const ClientProfile& base,
               std::optional<std::uint32_t> exit_after_fits) {
  auto file = read_shard_file(shard_path);
  auto profile = base;
  profile.client_id = client_id;
  SimulatedClient client(profile, std::move(file.shard), file.num_classes);
  if (exit_after_fits) {
    CrashAfterFits crashing(client, *exit_after_fits);
    run_client(parse_endpoint(server), client_id, client.capabilities(), crashing);
  } else {
    run_client(parse_endpoint(server), client_id, client.capabilities(), client);
  }
  return 0;
}

int cmd_shards(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config_file(config_path);
  const auto shards = build_shards(cfg);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < shards.size(); ++i) {
    const auto path = fs::path(out_dir) / (cfg.clients[i].client_id + ".shard");
    write_shard_file(path, shards[i], cfg.dataset.n_classes);
    std::cout << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with a binary client protocol"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "results";

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");

  std::string factor;
  std::string values;
  auto* sw = app.add_subcommand("sweep", "Run one experiment per factor value");
  sw->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sw->add_option("--factor", factor, "local_epochs | clients_per_round | tau[:class]")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", out_dir, "Output directory");

  std::string bind = "0.0.0.0:8080";
  std::uint32_t rounds = 10;
  std::size_t min_clients = 2;
  std::string strategy;
  std::string serve_out;
  auto* serve = app.add_subcommand("serve", "Run a standalone TCP server");
  serve->add_option("--bind", bind, "host:port to listen on");
  serve->add_option("--rounds", rounds, "Number of rounds");
  serve->add_option("--min-clients", min_clients, "Clients to wait for before starting");
  serve->add_option("--strategy", strategy, "fedavg | deadline");
  serve->add_option("--config", config_path, "Experiment config for hyper-parameters");
  serve->add_option("--out", serve_out, "CSV path (default: stdout)");

  std::string server = "127.0.0.1:8080";
  std::string client_id;
  std::string shard_path;
  ClientProfile profile;
  std::optional<std::uint32_t> exit_after_fits;
  auto* client = app.add_subcommand("client", "Run a simulated client against a server");
  client->add_option("--server", server, "host:port of the server");
  client->add_option("--client-id", client_id, "Unique client id")->required();
  client->add_option("--shard", shard_path, "Shard file")->required();
  client->add_option("--processor-class", profile.processor_class, "Processor class");
  client->add_option("--seconds-per-sample", profile.seconds_per_sample,
                     "Virtual seconds per training sample");
  client->add_option("--power-watts", profile.power_watts, "Active power draw");
  client->add_option("--exit-after-fits", exit_after_fits,
                     "Fault injection: die on the fit request after this many");

  auto* shards = app.add_subcommand("shards", "Write per-client shard files for a config");
  shards->add_option("--config", config_path, "Experiment config (JSON)")->required();
  shards->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*sw) return cmd_sweep(config_path, factor, values, out_dir);
    if (*serve) return cmd_serve(bind, rounds, min_clients, strategy, config_path, serve_out);
    if (*client) return cmd_client(server, client_id, shard_path, profile, exit_after_fits);
    if (*shards) return cmd_shards(config_path, out_dir);
  } catch (const Error& e) {
    std::cerr << "fedsim: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fedsim: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
