#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdrel/detector.hpp"

namespace ssdrel {

/// Output directory or file could not be written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReportFormat : std::uint8_t { Csv, Json };

/// Rounds to the six decimals used in every emitted file, so that re-parsed
/// values compare equal.
double round6(double x);

/// One row per report, stable column order. Undefined per-fault ratios are
/// empty cells.
std::string report_csv(const std::vector<ExperimentReport>& reports);
std::string report_json(const std::vector<ExperimentReport>& reports);
std::vector<ExperimentReport> parse_report_csv(std::istream& in);

/// Creates `dir` if needed and checks that a file can be created in it.
void ensure_writable_dir(const std::string& dir);
void write_file(const std::string& path, const std::string& content);

/// Writes report.csv or report.json under `dir`.
void emit_report(const std::vector<ExperimentReport>& reports, const std::string& dir, ReportFormat format,
                 const std::string& stem = "report");

}  // namespace ssdrel
