#include "ssdrel/campaign.hpp"

#include <cctype>
#include <exception>
#include <filesystem>
#include <sstream>

#include "ssdrel/experiment.hpp"
#include "ssdrel/report.hpp"

namespace ssdrel {

namespace {

struct Point {
  ExperimentConfig cfg;
  ExperimentReport report;
  std::exception_ptr error;
};

void run_points(std::vector<Point>& points, bool parallel) {
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      points[i].report = run_experiment(points[i].cfg);
    } catch (...) {
      points[i].error = std::current_exception();
    }
  }
  for (auto& p : points)
    if (p.error) std::rethrow_exception(p.error);
}

std::vector<Point> make_points(const ExperimentConfig& base, const std::string& key,
                               const std::vector<std::string>& values) {
  std::vector<Point> points;
  for (const auto& v : values) {
    Point p;
    p.cfg = base;
    apply_sweep(p.cfg, key, v);
    if (!base.output_dir.empty())
      p.cfg.output_dir = (std::filesystem::path(base.output_dir) / point_dir_name(key, v)).string();
    p.cfg.validate();
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace

std::string point_dir_name(const std::string& key, const std::string& value) {
  std::string out = key + "_";
  for (char c : value) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '-';
  return out;
}

std::vector<ExperimentReport> run_sweep(const ExperimentConfig& base, const std::string& key,
                                        const std::vector<std::string>& values, bool parallel) {
  auto points = make_points(base, key, values);
  run_points(points, parallel);
  std::vector<ExperimentReport> out;
  for (auto& p : points) out.push_back(std::move(p.report));
  return out;
}

CampaignResult run_campaign(const CampaignConfig& cfg) {
  if (cfg.sweeps.empty()) throw ConfigError("campaign has no sweeps");
  std::vector<Point> points;
  std::vector<std::size_t> group_end;
  for (const auto& s : cfg.sweeps) {
    auto more = make_points(cfg.base, s.key, s.values);
    for (auto& p : more) points.push_back(std::move(p));
    group_end.push_back(points.size());
  }
  if (!cfg.base.output_dir.empty()) ensure_writable_dir(cfg.base.output_dir);
  run_points(points, cfg.parallel);

  CampaignResult result;
  for (auto& p : points) result.reports.push_back(p.report);
  if (cfg.matrix) {
    std::vector<SweepGroup> groups;
    std::size_t begin = 0;
    for (std::size_t g = 0; g < cfg.sweeps.size(); ++g) {
      SweepGroup sg;
      sg.sweep = cfg.sweeps[g].key;
      sg.reports.assign(result.reports.begin() + begin, result.reports.begin() + group_end[g]);
      groups.push_back(std::move(sg));
      begin = group_end[g];
    }
    result.matrix = dependency_matrix(groups);
  }
  if (!cfg.base.output_dir.empty()) {
    emit_report(result.reports, cfg.base.output_dir, ReportFormat::Csv, "campaign");
    if (result.matrix) {
      std::ostringstream m;
      write_dependency_matrix(m, *result.matrix);
      write_file((std::filesystem::path(cfg.base.output_dir) / "matrix.csv").string(), m.str());
    }
  }
  return result;
}

}  // namespace ssdrel
