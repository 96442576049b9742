#include "fedsim/hetero.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/error.hpp"

namespace fedsim {

void validate_profile(const ClientProfile& profile) {
  if (!(profile.seconds_per_sample > 0.0) || !std::isfinite(profile.seconds_per_sample)) {
    fail(ErrorCode::kValidationError,
         "client '" + profile.client_id + "': seconds_per_sample must be > 0");
  }
  if (!(profile.power_watts > 0.0) || !std::isfinite(profile.power_watts)) {
    fail(ErrorCode::kValidationError,
         "client '" + profile.client_id + "': power_watts must be > 0");
  }
}

ConfigMap profile_capabilities(const ClientProfile& profile, std::size_t train_count) {
  ConfigMap caps;
  caps.set(capability_key::kProcessorClass, profile.processor_class);
  caps.set(capability_key::kSecondsPerSample, profile.seconds_per_sample);
  caps.set(capability_key::kPowerWatts, profile.power_watts);
  caps.set(capability_key::kTrainCount, static_cast<std::int64_t>(train_count));
  return caps;
}

SimulatedFit simulate_fit(const ClientProfile& profile, HeadClient& client,
                          const Parameters& params, const ConfigMap& config) {
  validate_profile(profile);
  const auto cutoff = config.try_double(config_key::kCutoffSeconds);
  if (cutoff && !(*cutoff >= 0.0)) {
    fail(ErrorCode::kValidationError, "cutoff_seconds must be >= 0");
  }

  // Time is derived from the integer sample count so the uncut total equals
  // E * n_train * seconds_per_sample exactly.
  std::uint64_t visits = 0;
  BatchGate gate;
  if (cutoff && *cutoff > 0.0) {
    gate = [&visits, &profile, tau = *cutoff](std::size_t batch) {
      const double after = static_cast<double>(visits + batch) * profile.seconds_per_sample;
      if (after > tau) return false;
      visits += batch;
      return true;
    };
  }

  SimulatedFit out;
  out.result = client.fit_local(params, config, gate);
  out.virtual_time_s =
      static_cast<double>(out.result.num_examples) * profile.seconds_per_sample;
  out.energy_j = profile.power_watts * out.virtual_time_s;
  out.result.metrics.set(metric_key::kVirtualTime, out.virtual_time_s);
  out.result.metrics.set(metric_key::kEnergy, out.energy_j);
  return out;
}

SimulatedClient::SimulatedClient(ClientProfile profile, Shard shard, std::size_t num_classes)
    : profile_(std::move(profile)), inner_(std::move(shard), num_classes) {
  validate_profile(profile_);
}

FitRes SimulatedClient::fit(const FitIns& ins) {
  return to_fit_res(simulate_fit(profile_, inner_, ins.parameters, ins.config).result);
}

ConfigMap SimulatedClient::capabilities() const {
  return profile_capabilities(profile_, inner_.shard().train_count);
}

double round_time(std::span<const double> client_times) {
  if (client_times.empty()) fail(ErrorCode::kEmptyList, "no client times");
  return *std::max_element(client_times.begin(), client_times.end());
}

double round_energy(std::span<const double> client_energies) {
  if (client_energies.empty()) fail(ErrorCode::kEmptyList, "no client energies");
  double total = 0.0;
  for (auto e : client_energies) total += e;
  return total;
}

}  // namespace fedsim
