#include <benchmark/benchmark.h>

#include "fedsim/model.hpp"
#include "fedsim/strategy.hpp"

namespace {

std::vector<fedsim::FitOutcome> results(std::size_t clients, std::size_t d) {
  std::vector<fedsim::FitOutcome> out;
  for (std::size_t i = 0; i < clients; ++i) {
    out.push_back({"c" + std::to_string(i), fedsim::HeadModel::random(d, 10, i).to_parameters(),
                   100 + i, {}});
  }
  return out;
}

void BM_FedAvgAggregate(benchmark::State& state) {
  const fedsim::FedAvg strategy(fedsim::FedAvgOptions{});
  const auto rs = results(static_cast<std::size_t>(state.range(0)),
                          static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(strategy.aggregate_fit(1, rs, {}));
  }
}
BENCHMARK(BM_FedAvgAggregate)->Args({10, 32})->Args({10, 1280})->Args({100, 1280});

}  // namespace
