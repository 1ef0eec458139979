#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdrel/fault_schedule.hpp"
#include "ssdrel/packet.hpp"

namespace ssdrel {

enum class FailureKind : std::uint8_t {
  NoFailure,
  IOError,
  FWA,
  Unserializable,
  ShornWrite,
  FDC,
  FlyingWrite,
  DeadDevice,
  InconsistentRecord,  // whole-range mismatch with every sub matching
};
inline constexpr std::size_t kFailureKindCount = 9;

enum class DeadKind : std::uint8_t { Metadata, Interface, Chip };

const char* to_string(FailureKind k);
bool parse_failure_kind(std::string_view s, FailureKind& out);
const char* to_string(DeadKind k);

/// Kinds counted as data failures in the per-fault metric.
bool is_data_failure(FailureKind k);

struct Verdict {
  FailureKind kind = FailureKind::NoFailure;
  std::uint32_t failed_subs = 0;  // ShornWrite
  std::uint64_t found_at = 0;     // FlyingWrite
  DeadKind dead = DeadKind::Metadata;

  std::string detail() const;
  bool operator==(const Verdict&) const = default;
};

struct DetectorConfig {
  SimTime timeout_us = 30 * kSecond;
  bool flying_scan = true;

  void validate() const;
};

class ClassificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The detection algorithm over a finalized packet's stored checksums.
/// FWA and InconsistentRecord verdicts are candidates for a flying-write scan.
Verdict classify(const DataPacket& packet, bool waw_flag, SimTime response_time_us, const DetectorConfig& cfg);

/// Same, taking the final checksums from `final_snapshot`. A packet that is
/// neither timed out nor finalized needs a snapshot covering its range.
Verdict classify(const DataPacket& packet, std::span<const std::uint8_t> final_snapshot, bool waw_flag,
                 SimTime response_time_us, const DetectorConfig& cfg);

struct VerdictRecord {
  std::uint64_t packet_id = 0;
  Verdict verdict;
  SimTime response_time_us = 0;
  Origin origin = Origin::App;

  bool operator==(const VerdictRecord&) const = default;
};

/// CSV `packet_id,kind,detail,response_time_us`.
void write_verdict_log(std::ostream& out, const std::vector<VerdictRecord>& records);
std::vector<VerdictRecord> read_verdict_log(std::istream& in);

struct TelemetrySummary {
  std::uint64_t samples = 0;
  double mean_current_ma = 0;
  double max_current_ma = 0;
  double mean_temperature_c = 0;
  double max_temperature_c = 0;

  bool operator==(const TelemetrySummary&) const = default;
};

struct ExperimentReport {
  std::string sweep_key;
  std::string sweep_value;
  std::array<std::uint64_t, kFailureKindCount> counts{};
  std::uint64_t power_faults = 0;
  std::array<std::uint64_t, 3> dead_incidents{};  // metadata, interface, chip
  std::uint64_t requests = 0;
  double responded_iops = 0;
  TelemetrySummary telemetry;

  std::uint64_t count(FailureKind k) const { return counts[static_cast<std::size_t>(k)]; }
  std::uint64_t data_failures() const;
  /// Nothing when no power fault was applied (counts-only report).
  std::optional<double> failures_per_power_fault() const;
  /// Per-fault rate of one kind, or its raw count without faults.
  double rate(FailureKind k) const;

  /// Adds counts, faults and incidents; other fields keep this report's values.
  ExperimentReport& operator+=(const ExperimentReport& other);
  bool operator==(const ExperimentReport&) const = default;
};

ExperimentReport aggregate(const std::vector<VerdictRecord>& verdicts, const std::vector<AppliedEvent>& fault_log);

/// Column order of the dependency matrix.
inline constexpr std::array<FailureKind, 7> kMatrixKinds = {
    FailureKind::FWA,        FailureKind::IOError,        FailureKind::FDC,        FailureKind::ShornWrite,
    FailureKind::FlyingWrite, FailureKind::Unserializable, FailureKind::DeadDevice};

struct SweepGroup {
  std::string sweep;
  std::vector<ExperimentReport> reports;
};

struct DependencyMatrix {
  std::vector<std::string> sweeps;
  /// Percent variation (max-min)/mean per sweep row and kind column.
  std::vector<std::array<double, kMatrixKinds.size()>> variation;
  /// Kinds by total variation across sweeps, largest first.
  std::vector<std::pair<FailureKind, double>> ranking;

  double cell(const std::string& sweep, FailureKind k) const;
  std::size_t rank_of(FailureKind k) const;
};

/// Throws std::invalid_argument for a group with fewer than two points.
DependencyMatrix dependency_matrix(const std::vector<SweepGroup>& groups);
void write_dependency_matrix(std::ostream& out, const DependencyMatrix& m);

}  // namespace ssdrel
