#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssdrel/config.hpp"
#include "ssdrel/detector.hpp"

namespace ssdrel {

struct CampaignResult {
  /// Sweep order, then value order.
  std::vector<ExperimentReport> reports;
  std::optional<DependencyMatrix> matrix;
};

/// Directory name of one sweep point under the campaign output directory.
std::string point_dir_name(const std::string& key, const std::string& value);

/// Runs every sweep point of the campaign. Points are independent runs that
/// share the base seed; with `parallel` they run on OpenMP threads. Point
/// outputs go to <output_dir>/<key>_<value>/, and campaign.csv (plus
/// matrix.csv when requested) to <output_dir>.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// One sweep over `values` applied to `base`.
std::vector<ExperimentReport> run_sweep(const ExperimentConfig& base, const std::string& key,
                                        const std::vector<std::string>& values, bool parallel = true);

}  // namespace ssdrel
