#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssdrel/config.hpp"
#include "ssdrel/detector.hpp"
#include "ssdrel/fault_schedule.hpp"
#include "ssdrel/packet.hpp"

namespace ssdrel {

enum class TracePhase : std::uint8_t { Queued, Dispatched, Completed, TimedOut };
const char* to_string(TracePhase p);

struct TraceEvent {
  std::uint64_t request = 0;
  OpKind op = OpKind::Write;
  TracePhase phase = TracePhase::Queued;
  SimTime time = 0;
  /// Device serving a read at dispatch; -1 for mirrored writes or no device.
  int device = -1;

  bool operator==(const TraceEvent&) const = default;
};

struct TelemetrySample {
  SimTime time = 0;
  int device = 0;
  Telemetry value;
};

struct ExperimentResult {
  ExperimentReport report;
  std::vector<VerdictRecord> verdicts;  // packet id order
  std::vector<DataPacket> packets;      // packet id order
  std::vector<TraceEvent> trace;
  std::vector<TelemetrySample> telemetry;
  std::vector<AppliedEvent> fault_log;
  FaultSchedule schedule;
  std::uint64_t scrub_repairs = 0;
  std::uint64_t relocations = 0;
  SimTime end_time = 0;
};

/// Runs one experiment in memory. Throws ConfigError before simulating.
ExperimentResult simulate(const ExperimentConfig& cfg);

/// Files: verdicts.csv, trace.csv, telemetry.csv, faults.csv, packets.db,
/// report.csv, report.json. The directory is checked before anything is
/// written.
void write_outputs(const ExperimentResult& result, const std::string& dir);

/// simulate() plus write_outputs() when cfg.output_dir is set.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

void write_trace_log(std::ostream& out, const std::vector<TraceEvent>& trace);
void write_telemetry_log(std::ostream& out, const std::vector<TelemetrySample>& samples);

}  // namespace ssdrel
