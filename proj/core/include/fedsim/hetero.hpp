#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "fedsim/client.hpp"

namespace fedsim {

/// Simulated hardware of one client. Virtual time for a round is
/// sample-visits x seconds_per_sample; energy is power_watts x that time.
struct ClientProfile {
  std::string client_id;
  std::string processor_class = "gpu";
  double seconds_per_sample = 0.01;
  double power_watts = 10.0;
  std::size_t shard_index = 0;

  bool operator==(const ClientProfile&) const = default;
};

/// Throws kValidationError on non-positive speed or power.
void validate_profile(const ClientProfile& profile);

/// Capabilities a simulated client announces in its Hello.
ConfigMap profile_capabilities(const ClientProfile& profile, std::size_t train_count);

namespace capability_key {
inline constexpr const char* kProcessorClass = "processor_class";
inline constexpr const char* kSecondsPerSample = "seconds_per_sample";
inline constexpr const char* kPowerWatts = "power_watts";
inline constexpr const char* kTrainCount = "train_count";
}  // namespace capability_key

struct SimulatedFit {
  FitResult result;
  double virtual_time_s = 0.0;
  double energy_j = 0.0;
};

/// Runs client.fit_local under the profile's virtual clock. With
/// config["cutoff_seconds"] = tau > 0, training stops before the first batch
/// whose completion would push virtual time past tau.
SimulatedFit simulate_fit(const ClientProfile& profile, HeadClient& client,
                          const Parameters& params, const ConfigMap& config);

/// HeadClient wrapped with a hardware profile; fit results carry
/// virtual_time_s, energy_J and completed_epochs metrics.
class SimulatedClient : public Client {
 public:
  SimulatedClient(ClientProfile profile, Shard shard, std::size_t num_classes);

  Parameters get_parameters() override { return inner_.get_parameters(); }
  FitRes fit(const FitIns& ins) override;
  EvaluateRes evaluate(const EvaluateIns& ins) override { return inner_.evaluate(ins); }

  const ClientProfile& profile() const noexcept { return profile_; }
  ConfigMap capabilities() const;

 private:
  ClientProfile profile_;
  HeadClient inner_;
};

/// Synchronous rounds wait for the slowest client. Throws kEmptyList.
double round_time(std::span<const double> client_times);
/// Total energy across clients. Throws kEmptyList.
double round_energy(std::span<const double> client_energies);

}  // namespace fedsim
