#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/client_proxy.hpp"
#include "fedsim/tensor.hpp"

namespace fedsim {

using ClientProxyPtr = std::shared_ptr<ClientProxy>;

struct FitInstruction {
  std::string client_id;
  FitIns ins;
};

struct EvaluateInstruction {
  std::string client_id;
  EvaluateIns ins;
};

/// A successful fit reply. metrics carries virtual_time_s, energy_J and
/// completed_epochs when the client is simulated.
struct FitOutcome {
  std::string client_id;
  Parameters parameters;
  std::uint64_t num_examples = 0;
  ConfigMap metrics;
};

struct EvaluateOutcome {
  std::string client_id;
  double loss = 0.0;
  std::uint64_t num_examples = 0;
  ConfigMap metrics;
};

struct EvaluationSummary {
  double loss = 0.0;
  double accuracy = 0.0;
  std::uint64_t num_examples = 0;
};

struct WeightedParameters {
  const Parameters* parameters;
  std::uint64_t weight;
};

/// Element-wise sum(w_i * p_i) / sum(w_i) in float64, accumulated in the
/// given order. Throws kEmptyResults, kShapeMismatch, kZeroTotalWeight.
Parameters weighted_average(std::span<const WeightedParameters> items);

/// Example-weighted mean loss. Throws kEmptyResults, kZeroTotalWeight.
double aggregate_evaluate(std::span<const std::pair<double, std::uint64_t>> results);

/// Server-side policy: which instructions to send and how to fold replies.
/// Implementations are immutable after construction and deterministic.
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::vector<FitInstruction> configure_fit(
      std::uint32_t round, const Parameters& global,
      std::span<const ClientProxyPtr> clients) const = 0;

  /// `results` may arrive in any order; implementations sort by client_id
  /// before accumulating. Throws kInsufficientResults.
  virtual Parameters aggregate_fit(std::uint32_t round, std::vector<FitOutcome> results,
                                   std::span<const std::string> failures) const = 0;

  virtual std::vector<EvaluateInstruction> configure_evaluate(
      std::uint32_t round, const Parameters& global,
      std::span<const ClientProxyPtr> clients) const;

  /// Example-weighted loss and accuracy. Throws kEmptyResults.
  virtual EvaluationSummary aggregate_evaluate(std::uint32_t round,
                                               std::vector<EvaluateOutcome> results) const;

  /// Minimum successful fit replies out of `selected` for a round to count.
  virtual std::size_t min_successful_clients(std::size_t selected) const = 0;
};

struct FedAvgOptions {
  std::uint32_t local_epochs = 1;
  double learning_rate = 0.05;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 0;  // base for per-(round, client) training seeds
  std::optional<std::size_t> min_successful_clients;  // default: all selected
};

class FedAvg : public Strategy {
 public:
  explicit FedAvg(FedAvgOptions options);

  std::vector<FitInstruction> configure_fit(
      std::uint32_t round, const Parameters& global,
      std::span<const ClientProxyPtr> clients) const override;
  Parameters aggregate_fit(std::uint32_t round, std::vector<FitOutcome> results,
                           std::span<const std::string> failures) const override;
  std::size_t min_successful_clients(std::size_t selected) const override;

  const FedAvgOptions& options() const noexcept { return options_; }

 protected:
  ConfigMap base_fit_config(std::uint32_t round, const std::string& client_id) const;

 private:
  FedAvgOptions options_;
};

/// FedAvg where each processor class has a cutoff tau in seconds after which
/// its clients must return whatever they have. tau == 0 means no cutoff.
/// Replies are weighted by the examples actually processed.
class DeadlineFedAvg : public FedAvg {
 public:
  /// Throws kValidationError for negative or non-finite tau.
  DeadlineFedAvg(FedAvgOptions options, std::map<std::string, double> tau_seconds_by_class);

  /// Throws kUnknownProcessorClass when a client's class has no tau.
  std::vector<FitInstruction> configure_fit(
      std::uint32_t round, const Parameters& global,
      std::span<const ClientProxyPtr> clients) const override;
  Parameters aggregate_fit(std::uint32_t round, std::vector<FitOutcome> results,
                           std::span<const std::string> failures) const override;

  const std::map<std::string, double>& tau_seconds_by_class() const noexcept {
    return tau_;
  }

 private:
  std::map<std::string, double> tau_;
};

}  // namespace fedsim
