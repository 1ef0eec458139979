#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdrel/cache_stack.hpp"
#include "ssdrel/detector.hpp"
#include "ssdrel/fault_schedule.hpp"
#include "ssdrel/ssd_model.hpp"
#include "ssdrel/workload.hpp"

namespace ssdrel {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FaultParams {
  std::size_t n_faults = 60;
  SimTime min_gap_us = 10 * kSecond;
  /// Time from each cut to the matching power-on.
  SimTime off_us = 1'900'000;
  FaultDistribution distribution = FaultDistribution::Uniform;
  /// Ambient temperature step applied to both devices; NaN for none.
  double ambient_c = std::numeric_limits<double>::quiet_NaN();
  SimTime ambient_at_us = 0;
};

struct ExperimentConfig {
  WorkloadSpec workload;
  /// Arrival time of the first request when there are no power faults.
  SimTime workload_start_us = 0;
  SsdConfig primary = preset_config(ReliabilityPreset::B);
  SsdConfig secondary = preset_config(ReliabilityPreset::B);
  CacheConfig cache;
  RaidConfig raid;
  BackingConfig backing;
  FaultParams faults;
  DetectorConfig detector;
  SimTime telemetry_period_us = 5'000;
  std::uint64_t seed = 1;
  bool store_payloads = false;
  std::string output_dir;
  /// Label of the sweep point this run belongs to, copied into its report.
  std::string sweep_key;
  std::string sweep_value;

  /// Throws ConfigError.
  void validate() const;
};

struct SweepSpec {
  std::string key;
  std::vector<std::string> values;
};

struct CampaignConfig {
  ExperimentConfig base;
  std::vector<SweepSpec> sweeps;
  bool matrix = false;
  bool parallel = true;
};

/// "64K", "1M", "2G" or plain bytes.
std::uint64_t parse_size(const std::string& text);
std::string format_size(std::uint64_t bytes);

/// INI text: top-level keys plus [workload], [primary], [secondary], [cache],
/// [raid], [backing], [faults], [detector] and [telemetry] sections.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);
/// The same format with a [campaign] section holding `sweep = key: v1, v2`
/// lines and `matrix`, `parallel` flags.
CampaignConfig parse_campaign_config(std::istream& in);
CampaignConfig load_campaign_config(const std::string& path);

/// Sets one sweep parameter on a config. Throws ConfigError for unknown keys
/// or values.
void apply_sweep(ExperimentConfig& cfg, const std::string& key, const std::string& value);
const std::vector<std::string>& sweep_keys();

}  // namespace ssdrel
