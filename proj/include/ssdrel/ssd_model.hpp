#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssdrel/block_store.hpp"
#include "ssdrel/packet.hpp"
#include "ssdrel/power_model.hpp"
#include "ssdrel/rng.hpp"
#include "ssdrel/units.hpp"

namespace ssdrel {

enum class PowerState : std::uint8_t { On, FallingVoltage, Off, Recovering };
enum class Health : std::uint8_t { Healthy, MetadataCorruption, InterfaceCorruption, ChipFailure };
enum class ReliabilityPreset : std::uint8_t { A, B, C, D };

const char* to_string(PowerState s);
const char* to_string(Health h);
const char* to_string(ReliabilityPreset p);
bool parse_preset(std::string_view s, ReliabilityPreset& out);

struct DeadHazards {
  double metadata = 1e-4;
  double interface = 1e-4;
  double chip = 1e-5;
};

struct CurrentLevels {
  double idle_ma = 80;
  double read_ma = 250;
  double write_ma = 400;
  double recovery_ma = 300;
};

struct SsdConfig {
  std::uint64_t capacity_bytes = 64 * MiB;
  std::uint32_t ncq_depth = 32;
  std::uint64_t dram_buffer_bytes = 4 * MiB;
  /// NAND program time of one sub-request, regardless of its size.
  SimTime program_latency_us = 500;
  bool ack_on_buffer = true;
  bool plp = false;
  std::uint32_t map_checkpoint_every = 128;
  double p_fly = 0.0005;
  /// Chance that a program cut off by power loss leaves its pages holding
  /// neither the old nor the new data.
  double p_torn_program = 0.2;
  DeadHazards dead_hazards;
  double throttle_temp_c = 55;
  ReliabilityPreset reliability_preset = ReliabilityPreset::B;

  std::uint32_t nand_channels = 16;
  SimTime read_latency_us = 100;  // per sub-request
  /// A buffered sub-request waits this long before programming unless the
  /// buffer is above flush_watermark. Ignored when ack_on_buffer is false.
  SimTime flush_delay_us = 20'000;
  double flush_watermark = 0.5;
  SimTime recovery_us = 2'000'000;
  double initial_temp_c = 31;
  SimTime thermal_tau_us = 20'000'000;
  double metadata_region_fraction = 1.0 / 16;
  PowerModel power;
  CurrentLevels current;
  std::uint64_t seed = 1;

  void validate() const;
  double effective_p_fly() const { return plp ? 0.0 : p_fly; }
};

/// Preset scalars. C is the most reliable (power-loss protection), A the least.
SsdConfig preset_config(ReliabilityPreset p);

struct SubIo {
  std::uint64_t address = 0;
  std::uint32_t size = 0;
};

struct DeviceCommand {
  OpKind op = OpKind::Write;
  std::vector<SubIo> subs;
  /// Write payload: the subs' bytes concatenated in order.
  std::shared_ptr<const std::vector<std::uint8_t>> data;
  /// Reads only: return the bytes with the completion.
  bool capture = false;
};

using CommandHandle = std::uint64_t;

enum class CompletionKind : std::uint8_t {
  Ack,        // host-visible completion
  Persisted,  // every sub-request of a write is in NAND
  Error,      // media error (unavailable metadata region)
  Aborted,    // dropped unacknowledged by a power loss; the host may retry
  Lost,       // acknowledged write whose volatile data was discarded (diagnostic)
};

struct CompletionEvent {
  CommandHandle handle = 0;
  SimTime time = 0;
  CompletionKind kind = CompletionKind::Ack;
  std::shared_ptr<std::vector<std::uint8_t>> data;
};

enum class SubmitStatus : std::uint8_t { Accepted, Unavailable, Backpressure };

struct SubmitResult {
  SubmitStatus status = SubmitStatus::Accepted;
  CommandHandle handle = 0;
};

struct Telemetry {
  double current_ma = 0;
  double temperature_c = 0;
  PowerState power = PowerState::On;
};

/// Record of a sub-request that landed at the wrong address on power loss.
struct Relocation {
  std::uint64_t intended = 0;
  std::uint64_t landed = 0;
  std::uint32_t size = 0;
};

/// Discrete-event model of one SSD. Advance with tick(); submit() and the
/// power operations must be called with a clock no older than the last tick.
///
/// Writes are transferred one sub-request at a time from the NCQ into the DRAM
/// buffer, choosing randomly among commands that do not overlap an older
/// queued command. Sub-requests leave the buffer in FIFO order through
/// nand_channels parallel programs.
class SsdModel {
 public:
  explicit SsdModel(SsdConfig cfg);

  const SsdConfig& config() const { return cfg_; }

  SubmitResult submit(const DeviceCommand& cmd, SimTime now);
  std::vector<CompletionEvent> tick(SimTime now);
  /// Earliest time tick() has something to do or report.
  std::optional<SimTime> next_event_time() const;

  void power_cut(SimTime now);
  /// Returns the time the device becomes ready, or nothing for a chip failure.
  std::optional<SimTime> power_on(SimTime now);
  void set_ambient(double temp_c, SimTime now);

  Telemetry telemetry(SimTime now) const;
  double temperature(SimTime now) const;
  bool throttled(SimTime now) const { return temperature(now) > cfg_.throttle_temp_c; }
  double voltage(SimTime now) const;

  PowerState power() const { return power_; }
  Health health() const { return health_; }
  std::uint64_t power_cycles() const { return power_cycles_; }
  SimTime clock() const { return clock_; }
  /// Cut time + t_unavail while voltage is falling.
  std::optional<SimTime> unavailable_at() const;
  std::optional<SimTime> ready_at() const;

  /// Accepts new commands right now (ignoring queue occupancy).
  bool accepting() const;
  /// Will never accept commands again.
  bool permanently_failed() const;
  std::uint32_t outstanding() const { return slots_used_; }
  bool queue_full() const { return slots_used_ >= cfg_.ncq_depth; }
  std::uint64_t buffered_bytes() const { return buffer_bytes_; }
  /// No queued commands and nothing volatile.
  bool quiescent() const { return live_.empty() && buffer_.empty(); }

  /// Device-visible contents: newest queued or buffered data, else NAND.
  /// Returns false if the range touches an unreadable metadata region.
  bool logical_read(std::uint64_t address, std::span<std::uint8_t> out) const;
  bool region_error(std::uint64_t address, std::uint64_t len) const;

  const BlockStore& nand() const { return nand_; }
  /// Direct NAND write for scrubbing and test setup. Requires quiescent().
  void admin_write(std::uint64_t address, std::span<const std::uint8_t> data);

  const std::vector<Relocation>& relocations() const { return relocations_; }
  std::optional<std::pair<std::uint64_t, std::uint64_t>> metadata_region() const { return bad_region_; }

 private:
  struct Command {
    CommandHandle handle = 0;
    DeviceCommand cmd;
    std::vector<std::uint64_t> offsets;  // byte offset of each sub in cmd.data
    std::uint64_t lo = 0, hi = 0;        // covered address range
    std::uint64_t first_seq = 0;         // volatile sequence number of sub 0
    std::size_t next_sub = 0;
    std::size_t committed = 0;
    bool acked = false;
    bool in_ncq = true;  // still holds dispatch work
    SimTime read_done = -1;
    std::shared_ptr<std::vector<std::uint8_t>> read_data;
  };

  struct Buffered {
    CommandHandle handle = 0;
    std::size_t sub = 0;
    std::uint64_t address = 0;
    std::uint32_t size = 0;
    std::uint64_t seq = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> owner;
    std::uint64_t offset = 0;
    SimTime admitted = 0;
    SimTime deadline = -1;
  };

  struct VolatileRef {
    std::uint64_t seq = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> owner;
    std::uint64_t offset = 0;  // of this block within owner
  };

  struct DirtyMapEntry {
    std::uint64_t address = 0;
    std::uint32_t size = 0;
    std::vector<std::uint8_t> previous;
    std::shared_ptr<const std::vector<std::uint8_t>> owner;
    std::uint64_t offset = 0;
  };

  std::optional<SimTime> next_internal_event() const;
  void process_at(SimTime t);
  void commit_front(SimTime t);
  void schedule_programs(SimTime t);
  void dispatch(SimTime t);
  void go_dark(SimTime t);
  void fly_dirty_entries();
  void tear_programs(SimTime t);
  void roll_hazards();
  void emit(CommandHandle h, SimTime t, CompletionKind k, std::shared_ptr<std::vector<std::uint8_t>> data = {});
  void release_slot();
  void forget_volatile(const Command& c);
  void capture_read(Command& c, SimTime t);
  bool flush_eligible(const Buffered& b, SimTime t) const;
  SimTime scaled(SimTime base, SimTime t) const { return throttled(t) ? 2 * base : base; }

  SsdConfig cfg_;
  Rng rng_;
  Rng hazard_rng_;
  Rng torn_rng_;
  BlockStore nand_;

  PowerState power_ = PowerState::On;
  Health health_ = Health::Healthy;
  std::uint64_t power_cycles_ = 0;
  SimTime clock_ = 0;
  SimTime unavail_at_ = -1;
  SimTime ready_at_ = -1;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> bad_region_;

  double ambient_c_;
  double temp_anchor_c_;
  SimTime temp_anchor_t_ = 0;

  CommandHandle next_handle_ = 1;
  std::uint64_t next_seq_ = 1;
  std::map<CommandHandle, Command> live_;
  std::vector<CommandHandle> ncq_;  // commands with dispatch work, submission order
  std::uint32_t slots_used_ = 0;

  std::deque<Buffered> buffer_;
  std::size_t scheduled_ = 0;  // buffer_[0, scheduled_) are programming
  std::uint64_t buffer_bytes_ = 0;
  SimTime last_deadline_ = 0;
  std::vector<SimTime> channel_free_;

  std::unordered_map<std::uint64_t, std::vector<VolatileRef>> volatile_;
  std::vector<DirtyMapEntry> map_dirty_;
  std::uint32_t ops_since_checkpoint_ = 0;
  std::vector<Relocation> relocations_;

  std::vector<CompletionEvent> outbox_;
};

}  // namespace ssdrel
