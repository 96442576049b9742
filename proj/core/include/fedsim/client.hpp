#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fedsim/model.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {

/// The three operations every federated client exposes. The server only
/// ever sees this surface, whether the client is in-process or remote.
class Client {
 public:
  virtual ~Client() = default;
  virtual Parameters get_parameters() = 0;
  virtual FitRes fit(const FitIns& ins) = 0;
  virtual EvaluateRes evaluate(const EvaluateIns& ins) = 0;
};

/// Config keys understood by the client runtime.
namespace config_key {
inline constexpr const char* kLocalEpochs = "local_epochs";
inline constexpr const char* kLearningRate = "learning_rate";
inline constexpr const char* kBatchSize = "batch_size";
inline constexpr const char* kSeed = "seed";
inline constexpr const char* kCutoffSeconds = "cutoff_seconds";
}  // namespace config_key

namespace metric_key {
inline constexpr const char* kFailed = "failed";
inline constexpr const char* kCompletedEpochs = "completed_epochs";
inline constexpr const char* kVirtualTime = "virtual_time_s";
inline constexpr const char* kEnergy = "energy_J";
inline constexpr const char* kAccuracy = "accuracy";
}  // namespace metric_key

/// Reads local_epochs / learning_rate / batch_size / seed. Throws
/// kMissingConfigKey or kValidationError.
TrainOptions train_options_from(const ConfigMap& config);

struct FitResult {
  Parameters parameters;
  std::uint64_t num_examples = 0;  // sample-visits executed
  double completed_epochs = 0.0;
  ConfigMap metrics;
};

/// Trains a softmax head on one shard.
class HeadClient : public Client {
 public:
  HeadClient(Shard shard, std::size_t num_classes, std::uint64_t init_seed = 0);

  Parameters get_parameters() override { return model_.to_parameters(); }
  FitRes fit(const FitIns& ins) override;
  EvaluateRes evaluate(const EvaluateIns& ins) override;

  /// fit with a per-batch gate; the gate sees each batch before it runs.
  FitResult fit_local(const Parameters& params, const ConfigMap& config,
                      const BatchGate& gate = {});

  const Shard& shard() const noexcept { return shard_; }
  const HeadModel& model() const noexcept { return model_; }

 private:
  Shard shard_;
  HeadModel model_;
};

FitRes to_fit_res(FitResult result);

/// Answers server instructions until Disconnect or EOF. Returns normally on
/// either; protocol errors propagate.
void serve_client(ByteChannel& conn, Client& client);

/// Connects, handshakes and serves.
void run_client(const Endpoint& server, const std::string& client_id,
                const ConfigMap& capabilities, Client& client);

}  // namespace fedsim
