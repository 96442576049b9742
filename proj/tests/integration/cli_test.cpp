#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/harness.hpp"
#include "fedsim/process.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

const char* kConfig = R"({
  "rounds": 3,
  "clients": [
    {"id": "gpu-a", "processor_class": "gpu", "seconds_per_sample": 0.01, "power_watts": 8},
    {"id": "cpu-b", "processor_class": "cpu", "seconds_per_sample": 0.0127, "power_watts": 4}
  ],
  "local_epochs": 2,
  "learning_rate": 0.01,
  "batch_size": 16,
  "dataset": {"n_samples": 400, "n_features": 6, "n_classes": 3, "class_separation": 2.0, "seed": 4},
  "seeds": {"model": 9, "sampling": 1}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedsim_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "cfg.json", kConfig);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }
  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static int run(std::vector<std::string> args, std::chrono::milliseconds timeout = 60s) {
    args.insert(args.begin(), FEDSIM_CLI_PATH);
    ChildProcess child(args);
    const auto status = child.wait(timeout);
    if (!status) return -1;
    return WIFEXITED(*status) ? WEXITSTATUS(*status) : 128 + WTERMSIG(*status);
  }

  fs::path dir_;
};

TEST_F(Cli, RunWritesTheSameCsvAsTheLibrary) {
  ASSERT_EQ(run({"run", "--config", (dir_ / "cfg.json").string(), "--out", (dir_ / "out").string()}), 0);
  const auto expected = format_metrics_csv(run_experiment(load_config(kConfig)).metrics);
  EXPECT_EQ(read(dir_ / "out" / "metrics.csv"), expected);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "metrics.csv.meta.json"));
}

TEST_F(Cli, SweepWritesOneTablePerValueAndSummary) {
  ASSERT_EQ(run({"sweep", "--config", (dir_ / "cfg.json").string(), "--factor", "tau:cpu",
                 "--values", "0,5,4", "--out", (dir_ / "sw").string()}),
            0);
  std::size_t tables = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "sw")) {
    if (e.path().extension() == ".csv" && e.path().filename() != "summary.csv") ++tables;
  }
  EXPECT_EQ(tables, 3u);
  const auto summary = read(dir_ / "sw" / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 4);
}

TEST_F(Cli, BadConfigExitsNonZero) {
  write(dir_ / "bad.json", R"({"clients": [{"id": "a"}], "clients_per_round": 5})");
  EXPECT_EQ(run({"run", "--config", (dir_ / "bad.json").string()}), 2);
  EXPECT_NE(run({"sweep", "--config", (dir_ / "cfg.json").string(), "--factor", "E", "--values", ""}), 0);
}

TEST_F(Cli, StandaloneServeAndClientsMatchInProcessRun) {
  ASSERT_EQ(run({"shards", "--config", (dir_ / "cfg.json").string(), "--out", (dir_ / "shards").string()}), 0);
  std::uint16_t port;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  const auto ep = "127.0.0.1:" + std::to_string(port);
  ChildProcess server({FEDSIM_CLI_PATH, "serve", "--bind", ep, "--rounds", "3", "--min-clients", "2",
                       "--config", (dir_ / "cfg.json").string(), "--out", (dir_ / "serve.csv").string()});
  ChildProcess a({FEDSIM_CLI_PATH, "client", "--server", ep, "--client-id", "gpu-a", "--shard",
                  (dir_ / "shards" / "gpu-a.shard").string(), "--processor-class", "gpu",
                  "--seconds-per-sample", "0.01", "--power-watts", "8"});
  ChildProcess b({FEDSIM_CLI_PATH, "client", "--server", ep, "--client-id", "cpu-b", "--shard",
                  (dir_ / "shards" / "cpu-b.shard").string(), "--processor-class", "cpu",
                  "--seconds-per-sample", "0.0127", "--power-watts", "4"});
  const auto status = server.wait(60s);
  ASSERT_TRUE(status);
  EXPECT_TRUE(WIFEXITED(*status) && WEXITSTATUS(*status) == 0);
  EXPECT_TRUE(a.wait(10s));
  EXPECT_TRUE(b.wait(10s));
  const auto expected = format_metrics_csv(run_experiment(load_config(kConfig)).metrics);
  EXPECT_EQ(read(dir_ / "serve.csv"), expected);
}

TEST_F(Cli, ClientWithoutServerFails) {
  ASSERT_EQ(run({"shards", "--config", (dir_ / "cfg.json").string(), "--out", (dir_ / "shards").string()}), 0);
  std::uint16_t port;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  EXPECT_NE(run({"client", "--server", "127.0.0.1:" + std::to_string(port), "--client-id", "x",
                 "--shard", (dir_ / "shards" / "gpu-a.shard").string()},
                30s),
            0);
}

}  // namespace
}  // namespace fedsim
