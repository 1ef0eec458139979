#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ssdrel/ssd_model.hpp"
#include "ssdrel/units.hpp"

namespace ssdrel {

class CacheStack;

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class FaultKind : std::uint8_t { PowerCut, PowerOn, SetAmbient };
enum class FaultDistribution : std::uint8_t { Uniform, Periodic };

const char* to_string(FaultKind k);
bool parse_fault_distribution(std::string_view s, FaultDistribution& out);
const char* to_string(FaultDistribution d);

struct FaultEvent {
  SimTime time = 0;
  FaultKind kind = FaultKind::PowerCut;
  double temp_c = 0;  // SetAmbient only

  bool operator==(const FaultEvent&) const = default;
};

struct FaultSchedule {
  std::vector<FaultEvent> events;
  std::uint64_t seed = 0;
  std::size_t power_faults = 0;

  bool operator==(const FaultSchedule&) const = default;
};

struct ScheduleParams {
  std::size_t n_faults = 0;
  SimTime run_duration_us = 0;
  SimTime min_gap_us = 10 * kSecond;
  /// Minimum off time; a PowerOn follows each PowerCut after exactly this long.
  SimTime t_zero_us = 1'900'000;
  FaultDistribution distribution = FaultDistribution::Uniform;
};

/// Power cut instants with at least min_gap_us of powered time before each
/// cut. Throws ScheduleError if n_faults * (min_gap_us + t_zero_us) exceeds
/// the run duration.
FaultSchedule schedule(std::uint64_t seed, const ScheduleParams& params);

/// Adds a SetAmbient event, keeping times strictly increasing.
void add_ambient(FaultSchedule& s, SimTime time, double temp_c);

/// Checks the ordering invariants; throws ScheduleError.
void validate(const FaultSchedule& s, SimTime t_zero_us);

struct AppliedEvent {
  SimTime time = 0;
  FaultKind kind = FaultKind::PowerCut;
  int device = 0;
  Health health_after = Health::Healthy;
  double temp_c = 0;

  bool operator==(const AppliedEvent&) const = default;
};

/// Applies schedule events to both devices of a stack at their instants.
class FaultInjector {
 public:
  explicit FaultInjector(FaultSchedule s) : schedule_(std::move(s)) {}

  std::optional<SimTime> next_time() const;
  /// Applies every event due at or before `now`; returns the new log rows.
  /// The stack must already be advanced to `now`.
  std::vector<AppliedEvent> apply_due(CacheStack& stack, SimTime now);
  const std::vector<AppliedEvent>& log() const { return log_; }
  bool done() const { return next_ == schedule_.events.size(); }

 private:
  FaultSchedule schedule_;
  std::size_t next_ = 0;
  std::vector<AppliedEvent> log_;
};

/// Drives an otherwise idle stack through the whole schedule.
std::vector<AppliedEvent> inject(const FaultSchedule& s, CacheStack& stack, SimTime start);

/// CSV `time_us,event,device,health_after`.
void write_fault_log(std::ostream& out, const std::vector<AppliedEvent>& log);
std::vector<AppliedEvent> read_fault_log(std::istream& in);

}  // namespace ssdrel
