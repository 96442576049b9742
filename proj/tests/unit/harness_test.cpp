#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/harness.hpp"
#include "test_util.hpp"

namespace fedsim {
namespace {

const char* kMinimal = R"({"clients": [{"id": "a"}, {"id": "b"}]})";

std::string small_config(const std::string& extra = "") {
  return R"({
    "rounds": 3,
    "clients": [
      {"id": "g0", "processor_class": "gpu", "seconds_per_sample": 0.01, "power_watts": 5},
      {"id": "g1", "processor_class": "gpu", "seconds_per_sample": 0.01, "power_watts": 5},
      {"id": "c0", "processor_class": "cpu", "seconds_per_sample": 0.0127, "power_watts": 3}
    ],
    "local_epochs": 2,
    "learning_rate": 0.05,
    "batch_size": 16,
    "dataset": {"n_samples": 600, "n_features": 8, "n_classes": 4, "class_separation": 2.0, "seed": 1},
    "partition": {"scheme": "iid"},
    "seeds": {"model": 3, "sampling": 4})" + extra + "}";
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(LoadConfig, MinimalGetsDefaults) {
  const auto c = load_config(kMinimal);
  EXPECT_EQ(c.rounds, 10u);
  ASSERT_EQ(c.clients.size(), 2u);
  EXPECT_EQ(c.clients[0].client_id, "a");
  EXPECT_EQ(c.clients[1].shard_index, 1u);
  EXPECT_EQ(c.clients_per_round, 2u);
  EXPECT_EQ(c.strategy.type, "fedavg");
  EXPECT_EQ(c.mode, RunMode::kInProcess);
}

TEST(LoadConfig, FullDocument) {
  const auto c = load_config(small_config(R"(, "mode": "tcp", "clients_per_round": 2,
      "strategy": {"type": "deadline", "tau_seconds_by_class": {"gpu": 0, "cpu": 119.4}})"));
  EXPECT_EQ(c.rounds, 3u);
  EXPECT_EQ(c.clients[2].seconds_per_sample, 0.0127);
  EXPECT_EQ(c.dataset.n_features, 8u);
  EXPECT_EQ(c.strategy.tau_seconds_by_class.at("cpu"), 119.4);
  EXPECT_EQ(c.mode, RunMode::kTcp);
  EXPECT_EQ(c.seeds.sampling, 4u);
}

TEST(LoadConfig, CanonicalJsonRoundTrips) {
  const auto c = load_config(small_config(R"(, "partition": {"scheme": "label_skew", "alpha": 0.3})"));
  EXPECT_EQ(load_config(config_to_json(c)), c);
}

void expect_invalid(const std::string& text, const std::string& field) {
  try {
    load_config(text);
    ADD_FAILURE() << "accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidationError) << e.what();
    EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
  }
}

TEST(LoadConfig, ValidationNamesTheField) {
  expect_invalid(R"({"clients": [{"id": "a"}], "clients_per_round": 2})", "clients_per_round");
  expect_invalid(R"({"clients": [{"id": "a", "processor_class": "cpu"}],
                     "strategy": {"type": "deadline", "tau_seconds_by_class": {"gpu": 1}}})",
                 "tau_seconds_by_class");
  expect_invalid(R"({"clients": [{"id": "a"}],
                     "strategy": {"type": "deadline", "tau_seconds_by_class": {"gpu": -1}}})",
                 "tau_seconds_by_class");
  expect_invalid(R"({"clients": [{"id": "a"}, {"id": "a"}]})", "clients");
  expect_invalid(R"({"clients": [{"id": "a", "seconds_per_sample": 0}]})", "seconds_per_sample");
  expect_invalid(R"({"clients": []})", "clients");
  expect_invalid(R"({"clients": [{"id": "a"}], "rounds": "ten"})", "rounds");
  expect_invalid(R"({"clients": [{"id": "a"}], "bogus": 1})", "bogus");
  expect_invalid(R"({"clients": [{"id": "a"}], "mode": "grpc"})", "mode");
  expect_invalid(R"({"clients": [{"id": "a"}], "batch_size": 0})", "batch_size");
  expect_invalid(R"({"clients": [{"id": "a"}, {"id": "b"}], "dataset": {"n_samples": 1}})", "dataset");
}

TEST(LoadConfig, SyntaxErrorIsParseError) {
  EXPECT_ERROR_CODE(load_config("{\"clients\": ["), ErrorCode::kParseError);
}

TEST(ConfigHash, StableAndIgnoresMode) {
  auto a = load_config(small_config());
  auto b = a;
  b.mode = RunMode::kTcp;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.local_epochs = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunExperiment, InProcessIsDeterministic) {
  const auto cfg = load_config(small_config());
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.metrics.rows.size(), 3u);
  EXPECT_EQ(format_metrics_csv(a.metrics), format_metrics_csv(b.metrics));
  EXPECT_EQ(a.final_parameters, b.final_parameters);
  // 600 samples over 3 iid shards: 200 each, 160 train rows, 2 epochs.
  EXPECT_EQ(a.metrics.rows[0].round_virtual_time_s, 320 * 0.0127);
  EXPECT_EQ(a.metrics.rows[0].participating_clients.size(), 3u);
}

TEST(RunExperiment, CrashInjectionRecordsFailure) {
  auto cfg = load_config(small_config(R"(, "strategy": {"type": "fedavg", "min_successful_clients": 2})"));
  RunOptions opt;
  opt.crash_after_fits["c0"] = 1;
  const auto r = run_experiment(cfg, opt);
  ASSERT_EQ(r.metrics.rows.size(), 3u);
  EXPECT_TRUE(r.metrics.rows[0].failed_clients.empty());
  EXPECT_EQ(r.metrics.rows[1].failed_clients, std::vector<std::string>{"c0"});
  EXPECT_EQ(r.metrics.rows[1].participating_clients.size(), 2u);
}

TEST(Metrics, HeaderOnlyForEmptyTable) {
  EXPECT_EQ(format_metrics_csv(MetricsTable{}),
            "round,global_loss,global_accuracy,round_virtual_time_s,round_energy_j,"
            "cum_virtual_time_s,cum_energy_j,participants\n");
}

TEST(Metrics, CsvReadBackIsExact) {
  const auto r = run_experiment(load_config(small_config()));
  const auto csv = format_metrics_csv(r.metrics);
  const auto rows = parse_metrics_csv(csv);
  ASSERT_EQ(rows.size(), r.metrics.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto expected = r.metrics.rows[i];
    expected.failed_clients.clear();
    EXPECT_EQ(rows[i], expected);
  }
}

TEST(Metrics, WritingTwiceGivesIdenticalFiles) {
  const auto r = run_experiment(load_config(small_config()));
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_metrics_test";
  std::filesystem::create_directories(dir);
  write_metrics(r.metrics, dir / "a.csv");
  write_metrics(r.metrics, dir / "b.csv");
  EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
  EXPECT_EQ(read_file(dir / "a.csv"), format_metrics_csv(r.metrics));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.csv.meta.json"));
  std::filesystem::remove_all(dir);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(3.0), "3");
  for (double v : {1.0 / 3.0, 1e-300, 123456.789, -0.0127}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Sweep, FactorNames) {
  EXPECT_EQ(parse_sweep_factor("local_epochs").factor, SweepFactor::kLocalEpochs);
  EXPECT_EQ(parse_sweep_factor("clients_per_round").factor, SweepFactor::kClientsPerRound);
  const auto t = parse_sweep_factor("tau:npu");
  EXPECT_EQ(t.factor, SweepFactor::kTau);
  EXPECT_EQ(t.tau_class, "npu");
  EXPECT_EQ(parse_sweep_factor("tau").tau_class, "cpu");
  EXPECT_ERROR_CODE(parse_sweep_factor("rounds"), ErrorCode::kValidationError);
}

TEST(Sweep, ApplyValueTouchesOnlyTheFactor) {
  const auto cfg = load_config(small_config());
  auto e = apply_sweep_value(cfg, parse_sweep_factor("local_epochs"), 5);
  EXPECT_EQ(e.local_epochs, 5u);
  e.local_epochs = cfg.local_epochs;
  EXPECT_EQ(e, cfg);

  const auto t = apply_sweep_value(cfg, parse_sweep_factor("tau"), 119.4);
  EXPECT_EQ(t.strategy.type, "deadline");
  EXPECT_EQ(t.strategy.tau_seconds_by_class.at("cpu"), 119.4);
  EXPECT_EQ(t.strategy.tau_seconds_by_class.at("gpu"), 0.0);
  EXPECT_EQ(t.seeds, cfg.seeds);

  EXPECT_ERROR_CODE(apply_sweep_value(cfg, parse_sweep_factor("clients_per_round"), 4),
                    ErrorCode::kValidationError);
  EXPECT_ERROR_CODE(apply_sweep_value(cfg, parse_sweep_factor("local_epochs"), 1.5),
                    ErrorCode::kValidationError);
}

TEST(Sweep, OneTablePerValueAndSummary) {
  const auto cfg = load_config(small_config());
  const auto spec = parse_sweep_factor("local_epochs");
  const auto entries = sweep(cfg, spec, {1, 2});
  ASSERT_EQ(entries.size(), 2u);
  for (const auto& e : entries) ASSERT_TRUE(e.result) << e.error;
  EXPECT_EQ(entries[1].result->metrics.rows.back().cumulative_virtual_time_s,
            2.0 * entries[0].result->metrics.rows.back().cumulative_virtual_time_s);
  const auto csv = format_sweep_summary_csv(spec, entries);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_FALSE(format_sweep_summary_table(spec, entries).empty());
}

TEST(Sweep, TauZeroMatchesPlainFedAvg) {
  const auto cfg = load_config(small_config());
  const auto entries = sweep(cfg, parse_sweep_factor("tau"), {0.0});
  ASSERT_TRUE(entries[0].result);
  const auto plain = run_experiment(cfg);
  EXPECT_EQ(entries[0].result->final_parameters, plain.final_parameters);
  EXPECT_EQ(format_metrics_csv(entries[0].result->metrics), format_metrics_csv(plain.metrics));
}

TEST(Sweep, EmptyValuesRejected) {
  EXPECT_ERROR_CODE(sweep(load_config(small_config()), SweepSpec{}, {}), ErrorCode::kValidationError);
}

}  // namespace
}  // namespace fedsim
