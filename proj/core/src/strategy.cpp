#include "fedsim/strategy.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/error.hpp"
#include "fedsim/hetero.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

Parameters weighted_average(std::span<const WeightedParameters> items) {
  if (items.empty()) fail(ErrorCode::kEmptyResults, "nothing to average");
  const Parameters& first = *items.front().parameters;
  long double total_weight = 0;
  for (const auto& item : items) {
    if (!shape_compatible(first, *item.parameters)) {
      fail(ErrorCode::kShapeMismatch, "parameters are not shape-compatible");
    }
    total_weight += item.weight;
  }
  if (total_weight == 0) fail(ErrorCode::kZeroTotalWeight, "all weights are zero");
  const double total = static_cast<double>(total_weight);

  // Accumulate offsets from the first item: equal inputs (and a single
  // input) then reproduce the input exactly.
  Parameters out;
  out.tensors.reserve(first.tensors.size());
  for (std::size_t t = 0; t < first.tensors.size(); ++t) {
    const auto& anchor = first.tensors[t].data();
    std::vector<double> acc(anchor.size(), 0.0);
    for (const auto& item : items) {
      const auto& values = item.parameters->tensors[t].data();
      const double w = static_cast<double>(item.weight);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * (values[i] - anchor[i]);
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = anchor[i] + acc[i] / total;
    out.tensors.push_back(make_tensor(first.tensors[t].shape(), std::move(acc)));
  }
  return out;
}

double aggregate_evaluate(std::span<const std::pair<double, std::uint64_t>> results) {
  if (results.empty()) fail(ErrorCode::kEmptyResults, "no evaluation results");
  double weighted = 0.0;
  std::uint64_t total = 0;
  for (const auto& [loss, n] : results) {
    weighted += loss * static_cast<double>(n);
    total += n;
  }
  if (total == 0) fail(ErrorCode::kZeroTotalWeight, "evaluation covered zero examples");
  return weighted / static_cast<double>(total);
}

std::vector<EvaluateInstruction> Strategy::configure_evaluate(
    std::uint32_t, const Parameters& global, std::span<const ClientProxyPtr> clients) const {
  std::vector<EvaluateInstruction> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back({c->client_id(), EvaluateIns{global, {}}});
  return out;
}

EvaluationSummary Strategy::aggregate_evaluate(std::uint32_t,
                                               std::vector<EvaluateOutcome> results) const {
  if (results.empty()) fail(ErrorCode::kEmptyResults, "no evaluation results");
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  std::vector<std::pair<double, std::uint64_t>> losses;
  std::vector<std::pair<double, std::uint64_t>> accuracies;
  EvaluationSummary s;
  for (const auto& r : results) {
    losses.emplace_back(r.loss, r.num_examples);
    accuracies.emplace_back(r.metrics.try_double(metric_key::kAccuracy).value_or(0.0),
                            r.num_examples);
    s.num_examples += r.num_examples;
  }
  s.loss = fedsim::aggregate_evaluate(losses);
  s.accuracy = fedsim::aggregate_evaluate(accuracies);
  return s;
}

FedAvg::FedAvg(FedAvgOptions options) : options_(std::move(options)) {
  if (options_.batch_size == 0) fail(ErrorCode::kValidationError, "batch_size must be >= 1");
  if (!(options_.learning_rate > 0.0) || !std::isfinite(options_.learning_rate)) {
    fail(ErrorCode::kValidationError, "learning_rate must be > 0");
  }
  if (options_.min_successful_clients && *options_.min_successful_clients == 0) {
    fail(ErrorCode::kValidationError, "min_successful_clients must be >= 1");
  }
}

ConfigMap FedAvg::base_fit_config(std::uint32_t round, const std::string& client_id) const {
  ConfigMap c;
  c.set(config_key::kLocalEpochs, static_cast<std::int64_t>(options_.local_epochs));
  c.set(config_key::kLearningRate, options_.learning_rate);
  c.set(config_key::kBatchSize, static_cast<std::int64_t>(options_.batch_size));
  c.set(config_key::kSeed,
        static_cast<std::int64_t>(derive_seed(options_.seed, round, client_id)));
  return c;
}

std::vector<FitInstruction> FedAvg::configure_fit(std::uint32_t round,
                                                  const Parameters& global,
                                                  std::span<const ClientProxyPtr> clients) const {
  std::vector<FitInstruction> out;
  out.reserve(clients.size());
  for (const auto& c : clients) {
    out.push_back({c->client_id(), FitIns{global, base_fit_config(round, c->client_id())}});
  }
  return out;
}

Parameters FedAvg::aggregate_fit(std::uint32_t, std::vector<FitOutcome> results,
                                 std::span<const std::string> failures) const {
  const auto needed = min_successful_clients(results.size() + failures.size());
  if (results.empty() || results.size() < needed) {
    fail(ErrorCode::kInsufficientResults, std::to_string(results.size()) +
                                              " successful results, need " +
                                              std::to_string(std::max<std::size_t>(needed, 1)));
  }
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
  std::vector<WeightedParameters> items;
  items.reserve(results.size());
  for (const auto& r : results) items.push_back({&r.parameters, r.num_examples});
  return weighted_average(items);
}

std::size_t FedAvg::min_successful_clients(std::size_t selected) const {
  if (options_.min_successful_clients) {
    return std::min(*options_.min_successful_clients, selected);
  }
  return selected;
}

DeadlineFedAvg::DeadlineFedAvg(FedAvgOptions options,
                               std::map<std::string, double> tau_seconds_by_class)
    : FedAvg(std::move(options)), tau_(std::move(tau_seconds_by_class)) {
  for (const auto& [cls, tau] : tau_) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
      fail(ErrorCode::kValidationError,
           "tau for processor class '" + cls + "' must be a finite value >= 0");
    }
  }
}

std::vector<FitInstruction> DeadlineFedAvg::configure_fit(
    std::uint32_t round, const Parameters& global,
    std::span<const ClientProxyPtr> clients) const {
  auto out = FedAvg::configure_fit(round, global, clients);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto* cls = clients[i]->capabilities().find(capability_key::kProcessorClass);
    const auto* name = cls ? std::get_if<std::string>(cls) : nullptr;
    if (name == nullptr) {
      fail(ErrorCode::kUnknownProcessorClass,
           "client '" + clients[i]->client_id() + "' reports no processor class");
    }
    auto it = tau_.find(*name);
    if (it == tau_.end()) {
      fail(ErrorCode::kUnknownProcessorClass,
           "no tau configured for processor class '" + *name + "'");
    }
    if (it->second > 0.0) out[i].ins.config.set(config_key::kCutoffSeconds, it->second);
  }
  return out;
}

Parameters DeadlineFedAvg::aggregate_fit(std::uint32_t round, std::vector<FitOutcome> results,
                                         std::span<const std::string> failures) const {
  // A reply that processed nothing under its cutoff counts as a failure.
  std::vector<std::string> all_failures(failures.begin(), failures.end());
  std::erase_if(results, [&](const FitOutcome& r) {
    if (r.num_examples > 0) return false;
    all_failures.push_back(r.client_id);
    return true;
  });
  return FedAvg::aggregate_fit(round, std::move(results), all_failures);
}

}  // namespace fedsim
