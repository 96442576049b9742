#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fedsim/client.hpp"
#include "fedsim/client_proxy.hpp"
#include "fedsim/hetero.hpp"
#include "fedsim/strategy.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fedsim {
namespace {

Parameters scalar(double v) { return Parameters{{make_tensor({}, {v})}}; }

FitOutcome outcome(std::string id, Parameters p, std::uint64_t n) {
  return FitOutcome{std::move(id), std::move(p), n, {}};
}

std::vector<ClientProxyPtr> fleet(std::size_t gpus, std::size_t cpus) {
  std::vector<ClientProxyPtr> out;
  auto add = [&](const std::string& id, const std::string& cls) {
    ConfigMap caps{{capability_key::kProcessorClass, cls}};
    out.push_back(std::make_shared<LocalClientProxy>(id, caps, nullptr));
  };
  for (std::size_t i = 0; i < gpus; ++i) add("gpu-" + std::to_string(i), "gpu");
  for (std::size_t i = 0; i < cpus; ++i) add("cpu-" + std::to_string(i), "cpu");
  return out;
}

TEST(WeightedAverage, HandComputedScalar) {
  const auto a = scalar(0.0), b = scalar(4.0);
  const std::vector<WeightedParameters> items{{&a, 1}, {&b, 3}};
  EXPECT_EQ(weighted_average(items).tensors[0].data()[0], 3.0);
}

TEST(WeightedAverage, EqualInputsGiveThatInputExactly) {
  const auto p = test::random_parameters(8);
  const std::vector<WeightedParameters> items{{&p, 3}, {&p, 5}};
  EXPECT_EQ(weighted_average(items), p);
}

TEST(WeightedAverage, EqualWeightMidpoint) {
  const Parameters a{{make_tensor({2}, {1.0, -2.0})}}, b{{make_tensor({2}, {3.0, 6.0})}};
  const std::vector<WeightedParameters> items{{&a, 7}, {&b, 7}};
  EXPECT_EQ(weighted_average(items).tensors[0].data(), (std::vector<double>{2.0, 2.0}));
}

TEST(WeightedAverage, Errors) {
  EXPECT_ERROR_CODE(weighted_average({}), ErrorCode::kEmptyResults);
  const auto a = scalar(1.0);
  const Parameters b{{make_tensor({1}, {1.0})}};
  EXPECT_ERROR_CODE(weighted_average(std::vector<WeightedParameters>{{&a, 1}, {&b, 1}}),
                    ErrorCode::kShapeMismatch);
  EXPECT_ERROR_CODE(weighted_average(std::vector<WeightedParameters>{{&a, 0}, {&a, 0}}),
                    ErrorCode::kZeroTotalWeight);
}

TEST(WeightedAverage, MatchesBruteForceOracle) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto in = test::random_aggregation_instance(s);
    std::vector<WeightedParameters> items;
    for (std::size_t i = 0; i < in.params.size(); ++i) items.push_back({&in.params[i], in.weights[i]});
    const auto got = weighted_average(items);
    for (std::size_t t = 0; t < got.tensors.size(); ++t) {
      const auto ref = oracle::weighted_mean(test::column(in.params, t), in.weights);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        worst = std::max(worst, std::fabs(ref[j] - got.tensors[t].data()[j]));
      }
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(AggregateEvaluate, Basics) {
  using R = std::pair<double, std::uint64_t>;
  EXPECT_EQ(aggregate_evaluate(std::vector<R>{{0.5, 10}}), 0.5);
  EXPECT_EQ(aggregate_evaluate(std::vector<R>{{0.0, 1}, {1.0, 1}}), 0.5);
  EXPECT_ERROR_CODE(aggregate_evaluate(std::vector<R>{}), ErrorCode::kEmptyResults);
  EXPECT_ERROR_CODE(aggregate_evaluate(std::vector<R>{{1.0, 0}}), ErrorCode::kZeroTotalWeight);
}

TEST(AggregateEvaluate, MatchesOracle) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    std::vector<std::pair<double, std::uint64_t>> rs;
    std::vector<std::vector<double>> vals;
    std::vector<std::uint64_t> ws;
    for (std::size_t i = 0, n = 1 + rng.index(10); i < n; ++i) {
      rs.emplace_back(rng.uniform(0.0, 5.0), 1 + rng.index(100));
      vals.push_back({rs.back().first});
      ws.push_back(rs.back().second);
    }
    EXPECT_NEAR(aggregate_evaluate(rs), oracle::weighted_mean(vals, ws)[0], 1e-12);
  }
}

TEST(FedAvg, ConfigureFitCarriesHyperParameters) {
  FedAvg s(FedAvgOptions{5, 0.1, 16, 3, std::nullopt});
  const auto clients = fleet(10, 0);
  const auto ins = s.configure_fit(2, scalar(1.0), clients);
  ASSERT_EQ(ins.size(), 10u);
  std::set<std::string> ids;
  std::set<std::int64_t> seeds;
  for (const auto& i : ins) {
    ids.insert(i.client_id);
    seeds.insert(i.ins.config.get_int(config_key::kSeed));
    EXPECT_EQ(i.ins.config.get_int(config_key::kLocalEpochs), 5);
    EXPECT_EQ(i.ins.config.get_double(config_key::kLearningRate), 0.1);
    EXPECT_EQ(i.ins.config.get_int(config_key::kBatchSize), 16);
    EXPECT_FALSE(i.ins.config.contains(config_key::kCutoffSeconds));
    EXPECT_EQ(i.ins.parameters, scalar(1.0));
  }
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(seeds.size(), 10u);
}

TEST(FedAvg, RoundSeedsAreDeterministic) {
  FedAvg s(FedAvgOptions{});
  const auto clients = fleet(3, 0);
  const auto a = s.configure_fit(4, scalar(0), clients);
  const auto b = s.configure_fit(4, scalar(0), clients);
  const auto c = s.configure_fit(5, scalar(0), clients);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].ins.config, b[i].ins.config);
    EXPECT_NE(a[i].ins.config.get_int(config_key::kSeed), c[i].ins.config.get_int(config_key::kSeed));
  }
}

TEST(FedAvg, SingleResultIsReturnedAsIs) {
  FedAvg s(FedAvgOptions{});
  const auto p = test::random_parameters(4);
  std::vector<FitOutcome> rs{outcome("a", p, 13)};
  EXPECT_EQ(s.aggregate_fit(1, rs, {}), p);
}

TEST(FedAvg, PermutationInvariantBitForBit) {
  FedAvg s(FedAvgOptions{});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto in = test::random_aggregation_instance(seed);
    std::vector<FitOutcome> rs;
    for (std::size_t i = 0; i < in.params.size(); ++i) rs.push_back(outcome(in.ids[i], in.params[i], in.weights[i]));
    const auto forward = s.aggregate_fit(1, rs, {});
    Rng rng(seed);
    rng.shuffle(std::span<FitOutcome>(rs));
    EXPECT_EQ(s.aggregate_fit(1, rs, {}), forward);
  }
}

TEST(FedAvg, MinSuccessfulClients) {
  FedAvg all(FedAvgOptions{});
  EXPECT_EQ(all.min_successful_clients(7), 7u);
  FedAvg two(FedAvgOptions{1, 0.05, 32, 0, 2});
  EXPECT_EQ(two.min_successful_clients(3), 2u);
  const std::vector<std::string> failures{"c"};
  EXPECT_ERROR_CODE(two.aggregate_fit(1, {outcome("a", scalar(1), 1)}, failures),
                    ErrorCode::kInsufficientResults);
  EXPECT_ERROR_CODE(all.aggregate_fit(1, {}, {}), ErrorCode::kInsufficientResults);
}

TEST(Deadline, TauOnlyForClassesWithCutoff) {
  DeadlineFedAvg s(FedAvgOptions{}, {{"gpu", 0.0}, {"cpu", 119.4}});
  const auto ins = s.configure_fit(1, scalar(0), fleet(1, 1));
  for (const auto& i : ins) {
    if (i.client_id.starts_with("gpu")) {
      EXPECT_FALSE(i.ins.config.contains(config_key::kCutoffSeconds));
    } else {
      EXPECT_EQ(i.ins.config.get_double(config_key::kCutoffSeconds), 119.4);
    }
  }
}

TEST(Deadline, AllZeroTauMatchesFedAvg) {
  const FedAvgOptions opt{3, 0.02, 8, 11, std::nullopt};
  FedAvg plain(opt);
  DeadlineFedAvg dl(opt, {{"gpu", 0.0}, {"cpu", 0.0}});
  const auto clients = fleet(2, 2);
  const auto a = plain.configure_fit(3, scalar(2), clients);
  const auto b = dl.configure_fit(3, scalar(2), clients);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].client_id, b[i].client_id);
    EXPECT_EQ(a[i].ins, b[i].ins);
  }
  const auto in = test::random_aggregation_instance(3);
  std::vector<FitOutcome> rs;
  for (std::size_t i = 0; i < in.params.size(); ++i) rs.push_back(outcome(in.ids[i], in.params[i], in.weights[i]));
  EXPECT_EQ(plain.aggregate_fit(1, rs, {}), dl.aggregate_fit(1, rs, {}));
}

TEST(Deadline, Validation) {
  EXPECT_ERROR_CODE(DeadlineFedAvg(FedAvgOptions{}, {{"cpu", -1.0}}), ErrorCode::kValidationError);
  EXPECT_ERROR_CODE(DeadlineFedAvg(FedAvgOptions{}, {{"cpu", INFINITY}}), ErrorCode::kValidationError);
  DeadlineFedAvg s(FedAvgOptions{}, {{"gpu", 0.0}});
  EXPECT_ERROR_CODE(s.configure_fit(1, scalar(0), fleet(1, 1)), ErrorCode::kUnknownProcessorClass);
}

TEST(Deadline, HalfCompletedClientHasHalfWeight) {
  // Two clients with 100 train rows each; the cpu one is cut off halfway.
  const auto shard = test::small_shard(125, 4, 3, 1);
  const auto start = HeadModel::random(4, 3, 2).to_parameters();
  DeadlineFedAvg s(FedAvgOptions{1, 0.05, 10, 0, std::nullopt}, {{"gpu", 0.0}, {"cpu", 0.5}});
  const auto ins = s.configure_fit(1, start, fleet(1, 1));

  std::vector<FitOutcome> rs;
  for (const auto& i : ins) {
    ClientProfile p;
    p.client_id = i.client_id;
    p.processor_class = i.client_id.substr(0, 3);
    p.seconds_per_sample = 0.01;
    HeadClient c(shard, 3);
    auto r = simulate_fit(p, c, i.ins.parameters, i.ins.config);
    rs.push_back(outcome(i.client_id, r.result.parameters, r.result.num_examples));
  }
  const auto& cpu = rs[0].client_id == "cpu-0" ? rs[0] : rs[1];
  const auto& gpu = rs[0].client_id == "cpu-0" ? rs[1] : rs[0];
  EXPECT_EQ(cpu.num_examples, 50u);
  EXPECT_EQ(gpu.num_examples, 100u);

  const auto got = s.aggregate_fit(1, rs, {});
  for (std::size_t t = 0; t < got.tensors.size(); ++t) {
    const auto ref = oracle::weighted_mean(
        {cpu.parameters.tensors[t].data(), gpu.parameters.tensors[t].data()}, {1, 2});
    for (std::size_t j = 0; j < ref.size(); ++j) {
      EXPECT_NEAR(got.tensors[t].data()[j], ref[j], 1e-15);
    }
  }
}

TEST(Strategy, ConfigureEvaluateDefaultsToEveryClient) {
  FedAvg s(FedAvgOptions{});
  const auto clients = fleet(2, 1);
  const auto ins = s.configure_evaluate(1, scalar(5), clients);
  ASSERT_EQ(ins.size(), 3u);
  for (const auto& i : ins) EXPECT_EQ(i.ins.parameters, scalar(5));
}

TEST(Strategy, AggregateEvaluateWeighsAccuracy) {
  FedAvg s(FedAvgOptions{});
  std::vector<EvaluateOutcome> rs{{"a", 1.0, 1, {{metric_key::kAccuracy, 0.0}}},
                                  {"b", 2.0, 3, {{metric_key::kAccuracy, 1.0}}}};
  const auto sum = s.aggregate_evaluate(1, rs);
  EXPECT_DOUBLE_EQ(sum.loss, 1.75);
  EXPECT_DOUBLE_EQ(sum.accuracy, 0.75);
  EXPECT_EQ(sum.num_examples, 4u);
}

}  // namespace
}  // namespace fedsim
