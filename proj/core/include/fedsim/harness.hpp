#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/hetero.hpp"
#include "fedsim/server.hpp"
#include "fedsim/strategy.hpp"

namespace fedsim {

enum class RunMode { kInProcess, kTcp };

std::string_view to_string(RunMode mode);

struct StrategyConfig {
  std::string type = "fedavg";  // "fedavg" | "deadline"
  std::map<std::string, double> tau_seconds_by_class;
  std::optional<std::size_t> min_successful_clients;

  bool operator==(const StrategyConfig&) const = default;
};

struct SeedConfig {
  std::uint64_t model = 0;
  std::uint64_t sampling = 0;

  bool operator==(const SeedConfig&) const = default;
};

struct ExperimentConfig {
  std::uint32_t rounds = 10;
  std::vector<ClientProfile> clients;
  std::size_t clients_per_round = 0;  // 0 on input means every client
  std::uint32_t local_epochs = 1;
  double learning_rate = 0.05;
  std::uint32_t batch_size = 32;
  DatasetSpec dataset;
  PartitionScheme partition;
  StrategyConfig strategy;
  SeedConfig seeds;
  RunMode mode = RunMode::kInProcess;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a JSON config. Throws kParseError or
/// kValidationError naming the offending field.
ExperimentConfig load_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Throws kValidationError.
void validate_config(const ExperimentConfig& cfg);

/// Canonical JSON form; load_config(config_to_json(c)) == c.
std::string config_to_json(const ExperimentConfig& cfg);
/// 16 hex digits identifying the canonical config.
std::string config_hash(const ExperimentConfig& cfg);

std::unique_ptr<Strategy> make_strategy(const ExperimentConfig& cfg);
Parameters initial_parameters(const ExperimentConfig& cfg);
/// Dataset generation + partitioning; shard i belongs to clients[i].
std::vector<Shard> build_shards(const ExperimentConfig& cfg);

struct MetricsTable {
  std::vector<RoundRecord> rows;
  std::string config_hash;
  RunMode mode = RunMode::kInProcess;
};

struct ExperimentResult {
  MetricsTable metrics;
  Parameters final_parameters;
};

struct RunOptions {
  /// fedsim executable used to launch clients in tcp mode.
  std::filesystem::path client_executable;
  /// Fault injection: the named client dies on receiving fit number n + 1.
  std::map<std::string, std::uint32_t> crash_after_fits;
  std::chrono::milliseconds connect_timeout{std::chrono::seconds(30)};
  std::function<void(const std::string&)> log;
};

/// Builds data, shards and clients, runs the federation and returns the
/// per-round metrics. In tcp mode, client processes are spawned locally
/// and torn down afterwards. Throws kRoundFailed, kSpawnError.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// CSV with the columns
/// round,global_loss,global_accuracy,round_virtual_time_s,round_energy_j,
/// cum_virtual_time_s,cum_energy_j,participants
/// Floats use the shortest round-trip representation; participants are
/// joined with ';'.
std::string format_metrics_csv(const MetricsTable& table);
/// Parses the CSV form back (failed_clients are not part of the CSV).
std::vector<RoundRecord> parse_metrics_csv(const std::string& text);

/// Writes the CSV to `path` and a sidecar `<path>.meta.json` with the
/// config hash, mode and per-round failures. Throws kIoError.
void write_metrics(const MetricsTable& table, const std::filesystem::path& path);

enum class SweepFactor { kLocalEpochs, kClientsPerRound, kTau };

struct SweepSpec {
  SweepFactor factor = SweepFactor::kLocalEpochs;
  std::string tau_class = "cpu";  // processor class swept for kTau
};

/// "local_epochs", "clients_per_round", "tau" or "tau:<class>".
SweepSpec parse_sweep_factor(const std::string& name);

/// Config with the factor set to `value`; every other field (seeds
/// included) is untouched. Throws kValidationError.
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const SweepSpec& spec,
                                   double value);

struct SweepEntry {
  double value = 0.0;
  std::optional<ExperimentResult> result;
  std::string error;
};

/// One run per value. A failing run is recorded and the sweep continues.
/// Throws kValidationError for an empty or invalid value list.
std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const SweepSpec& spec,
                              const std::vector<double>& values,
                              const RunOptions& options = {});

/// One row per value: final accuracy/loss, cumulative time and energy.
std::string format_sweep_summary_csv(const SweepSpec& spec,
                                     const std::vector<SweepEntry>& entries);
std::string format_sweep_summary_table(const SweepSpec& spec,
                                       const std::vector<SweepEntry>& entries);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fedsim
