#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssdrel/block_store.hpp"
#include "ssdrel/ssd_model.hpp"

namespace ssdrel {

enum class CachePolicy : std::uint8_t { WriteBack, WriteThrough, ReadOnly };

const char* to_string(CachePolicy p);
bool parse_cache_policy(std::string_view s, CachePolicy& out);

struct CacheConfig {
  CachePolicy policy = CachePolicy::WriteBack;
  std::uint64_t block_bytes = kBlockBytes;
  /// 0 selects 20% of the backing store.
  std::uint64_t cache_bytes = 0;
};

struct RaidConfig {
  /// Period of background scrubbing; 0 disables it (post-recovery scrubs
  /// are requested explicitly).
  SimTime scrub_interval_us = 0;
  std::uint32_t busy_threshold = 4;
};

/// Always-durable disk behind the cache. Requests are served one at a time.
struct BackingConfig {
  std::uint64_t capacity_bytes = 64 * MiB;
  SimTime seek_us = 4'000;
  double bytes_per_us = 150.0;  // 150 MB/s
};

using OpId = std::uint64_t;

enum class StackEventKind : std::uint8_t {
  Completed,         // application request (or promotion) finished
  PromotionIssued,   // a read miss is being written into the cache devices
};

struct StackEvent {
  StackEventKind kind = StackEventKind::Completed;
  OpId op = 0;
  SimTime time = 0;
  bool error = false;
  bool promotion = false;
  std::uint64_t address = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> data;  // PromotionIssued only
};

/// LRU block cache over a RAID-1 pair of SsdModels, fronting a backing disk.
/// Cache blocks map to the same address on the SSDs as on the backing disk.
class CacheStack {
 public:
  CacheStack(CacheConfig cache, RaidConfig raid, BackingConfig backing, SsdConfig primary, SsdConfig secondary);

  const CacheConfig& cache_config() const { return cache_; }
  std::uint64_t capacity_blocks() const { return capacity_blocks_; }

  OpId write(std::uint64_t address, std::shared_ptr<const std::vector<std::uint8_t>> payload, SimTime now);
  OpId read(std::uint64_t address, std::uint64_t size, SimTime now);

  std::vector<StackEvent> tick(SimTime now);
  std::optional<SimTime> next_event_time() const;

  /// Device chosen for the next read: 0 primary, 1 secondary.
  std::optional<int> route_read() const;
  /// What a read of the range would return now, through the cache.
  void read_view(std::uint64_t address, std::span<std::uint8_t> out) const;

  /// Copies primary bytes over mismatching secondary blocks. Skipped
  /// (nothing returned) unless both devices are on and idle.
  std::optional<std::vector<std::uint64_t>> scrub(SimTime now);
  /// Lets queued device commands flow again after an outage.
  void resume(SimTime now);

  /// Some device can take commands now.
  bool accepting() const;
  bool degraded() const;
  bool idle() const;

  SsdModel& device(int i) { return devices_[i]; }
  const SsdModel& device(int i) const { return devices_[i]; }
  BlockStore& backing() { return backing_; }
  const BlockStore& backing() const { return backing_; }

  bool cached(std::uint64_t block) const { return tags_.count(block) != 0; }
  bool dirty(std::uint64_t block) const;
  std::size_t cached_count() const { return tags_.size(); }
  /// Total application and promotion commands submitted to each device.
  std::array<std::uint64_t, 2> device_writes() const { return device_writes_; }

  /// Tags, dirty bits and LRU order (most recent first) as JSON.
  std::string dump_state() const;

 private:
  using Bytes = std::vector<std::uint8_t>;
  enum class OpKindTag : std::uint8_t { AppRead, AppWrite, Promotion, Insert };

  struct Op {
    OpKindTag kind = OpKindTag::AppWrite;
    int parts = 0;
    int acks = 0;
    bool error = false;
    bool notify = true;
    std::uint64_t address = 0;
    std::uint64_t size = 0;
  };

  struct HostCmd {
    OpId op = 0;
    DeviceCommand cmd;
    std::uint64_t seq = 0;
  };

  struct HddOp {
    enum class Kind : std::uint8_t { Write, ReadMiss, Evict } kind = Kind::Write;
    OpId op = 0;
    SimTime done = 0;
    std::vector<std::uint64_t> blocks;  // ReadMiss: blocks to promote
  };

  // A tag allocated by an application write is provisional until some data
  // reaches flash at that block: cache metadata persists with the data, so
  // losing both returns the block to the uncached state. Tags installed by
  // promotions and write-through inserts are recorded eagerly and survive a
  // lost population write.
  struct Tag {
    std::list<std::uint64_t>::iterator lru;
    bool dirty = false;
    bool provisional = false;
    std::array<std::uint64_t, 2> alloc_stamp{};  // NAND stamp per device at allocation
  };

  struct OverlayRef {
    std::uint64_t seq = 0;
    std::shared_ptr<const Bytes> owner;
    std::uint64_t offset = 0;
  };

  std::optional<SimTime> next_internal_event() const;
  void advance(SimTime now);
  OpId new_op(OpKindTag kind, std::uint64_t address, std::uint64_t size, bool notify = true);
  void part_done(OpId id, SimTime t, bool ok);
  void finish(OpId id, SimTime t);
  void mirror_write(OpId id, std::uint64_t address, std::shared_ptr<const Bytes> payload, SimTime now);
  void enqueue(int d, HostCmd cmd);
  void pump(int d, SimTime now);
  void drop_dead_device(int d, SimTime now);
  void handle_device_event(int d, const CompletionEvent& e);
  void hdd_enqueue(HddOp op, std::uint64_t bytes, SimTime now);
  void handle_hdd(const HddOp& op, SimTime t);
  void promote(std::uint64_t block, SimTime t);
  void insert_range(std::uint64_t address, std::uint64_t size, SimTime t);
  void touch_or_allocate(std::uint64_t block, bool dirty, SimTime now, bool provisional = false);
  void revert_lost(int d, std::uint64_t lo, std::uint64_t hi);
  void evict_one(SimTime now);
  void invalidate(std::uint64_t block);
  bool raid_writable() const;
  std::uint32_t depth(int d) const;
  void device_view(int d, std::uint64_t address, std::span<std::uint8_t> out) const;
  void overlay_add(int d, const HostCmd& c);
  void overlay_remove(int d, const HostCmd& c);
  DeviceCommand make_write(std::uint64_t address, std::shared_ptr<const Bytes> payload) const;

  CacheConfig cache_;
  RaidConfig raid_;
  BackingConfig backing_cfg_;
  std::uint64_t capacity_blocks_;
  std::array<SsdModel, 2> devices_;
  BlockStore backing_;

  std::list<std::uint64_t> lru_;  // front = most recently used
  std::unordered_map<std::uint64_t, Tag> tags_;

  OpId next_op_ = 1;
  std::map<OpId, Op> ops_;
  std::uint64_t next_seq_ = 1;
  std::array<std::deque<HostCmd>, 2> pending_;
  std::array<std::map<CommandHandle, HostCmd>, 2> inflight_;
  std::array<bool, 2> hold_{false, false};
  // Acknowledged application writes not yet on flash: handle -> byte range.
  std::array<std::unordered_map<CommandHandle, std::pair<std::uint64_t, std::uint64_t>>, 2> unflushed_;
  std::array<std::unordered_map<std::uint64_t, std::vector<OverlayRef>>, 2> overlay_;
  std::array<std::uint64_t, 2> device_writes_{0, 0};

  std::deque<HddOp> hdd_;
  SimTime hdd_busy_until_ = 0;
  SimTime next_scrub_ = -1;
  SimTime clock_ = 0;

  std::vector<StackEvent> out_;
};

}  // namespace ssdrel
