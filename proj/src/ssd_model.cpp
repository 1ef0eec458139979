#include "ssdrel/ssd_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace ssdrel {

const char* to_string(PowerState s) {
  switch (s) {
    case PowerState::On: return "on";
    case PowerState::FallingVoltage: return "falling";
    case PowerState::Off: return "off";
    case PowerState::Recovering: return "recovering";
  }
  return "?";
}

const char* to_string(Health h) {
  switch (h) {
    case Health::Healthy: return "healthy";
    case Health::MetadataCorruption: return "metadata_corruption";
    case Health::InterfaceCorruption: return "interface_corruption";
    case Health::ChipFailure: return "chip_failure";
  }
  return "?";
}

const char* to_string(ReliabilityPreset p) {
  static const char* kNames[] = {"A", "B", "C", "D"};
  return kNames[static_cast<int>(p)];
}

bool parse_preset(std::string_view s, ReliabilityPreset& out) {
  if (s.size() != 1 || s[0] < 'A' || s[0] > 'D') return false;
  out = static_cast<ReliabilityPreset>(s[0] - 'A');
  return true;
}

void SsdConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_fly) || !prob(p_torn_program) || !prob(dead_hazards.metadata) || !prob(dead_hazards.interface) || !prob(dead_hazards.chip))
    throw std::invalid_argument("ssd probabilities must lie in [0,1]");
  if (!block_aligned(capacity_bytes) || capacity_bytes == 0) throw std::invalid_argument("bad ssd capacity");
  if (ncq_depth == 0) throw std::invalid_argument("ncq_depth must be positive");
  if (dram_buffer_bytes < kDefaultMaxSubBytes) throw std::invalid_argument("dram buffer smaller than one sub-request");
  if (program_latency_us <= 0 || read_latency_us <= 0) throw std::invalid_argument("latencies must be positive");
  if (nand_channels == 0) throw std::invalid_argument("nand_channels must be positive");
  if (map_checkpoint_every == 0) throw std::invalid_argument("map_checkpoint_every must be positive");
  if (!(flush_watermark > 0 && flush_watermark <= 1)) throw std::invalid_argument("flush_watermark outside (0,1]");
  if (flush_delay_us < 0 || recovery_us < 0) throw std::invalid_argument("negative delay");
  if (thermal_tau_us <= 0) throw std::invalid_argument("thermal_tau_us must be positive");
  if (!(metadata_region_fraction > 0 && metadata_region_fraction <= 1))
    throw std::invalid_argument("metadata_region_fraction outside (0,1]");
  if (!(current.idle_ma >= 0 && current.idle_ma < current.read_ma && current.idle_ma < current.write_ma))
    throw std::invalid_argument("active current levels must exceed idle");
  power.validate();
}

SsdConfig preset_config(ReliabilityPreset p) {
  SsdConfig c;
  c.reliability_preset = p;
  switch (p) {
    case ReliabilityPreset::A:
      c.p_fly = 0.002;
      c.p_torn_program = 0.3;
      c.dead_hazards = {2e-4, 2e-4, 2e-5};
      break;
    case ReliabilityPreset::B:
      break;
    case ReliabilityPreset::C:
      c.plp = true;
      c.p_fly = 0.0;
      c.dead_hazards = {2e-5, 2e-5, 2e-6};
      break;
    case ReliabilityPreset::D:
      c.ack_on_buffer = false;
      c.dead_hazards = {5e-5, 5e-5, 5e-6};
      break;
  }
  return c;
}

SsdModel::SsdModel(SsdConfig cfg)
    : cfg_(std::move(cfg)),
      rng_(derive_seed(cfg_.seed, 0x55d)),
      hazard_rng_(derive_seed(cfg_.seed, 0x4a2)),
      torn_rng_(derive_seed(cfg_.seed, 0x70f)),
      nand_(cfg_.capacity_bytes),
      ambient_c_(cfg_.initial_temp_c),
      temp_anchor_c_(cfg_.initial_temp_c),
      channel_free_(cfg_.nand_channels, 0) {
  cfg_.validate();
}

bool SsdModel::accepting() const {
  const bool powered = power_ == PowerState::On || power_ == PowerState::FallingVoltage;
  return powered && !permanently_failed();
}

bool SsdModel::permanently_failed() const {
  return health_ == Health::InterfaceCorruption || health_ == Health::ChipFailure;
}

std::optional<SimTime> SsdModel::unavailable_at() const {
  if (power_ == PowerState::FallingVoltage) return unavail_at_;
  return std::nullopt;
}

std::optional<SimTime> SsdModel::ready_at() const {
  if (power_ == PowerState::Recovering) return ready_at_;
  return std::nullopt;
}

double SsdModel::voltage(SimTime now) const {
  if (power_ == PowerState::FallingVoltage || power_ == PowerState::Off) {
    if (power_ == PowerState::Off && unavail_at_ < 0) return 0.0;
    return cfg_.power.voltage(now - (unavail_at_ - cfg_.power.t_unavail_us));
  }
  return cfg_.power.v_full;
}

double SsdModel::temperature(SimTime now) const {
  const double dt = static_cast<double>(now - temp_anchor_t_);
  return ambient_c_ + (temp_anchor_c_ - ambient_c_) * std::exp(-dt / static_cast<double>(cfg_.thermal_tau_us));
}

void SsdModel::set_ambient(double temp_c, SimTime now) {
  temp_anchor_c_ = temperature(now);
  temp_anchor_t_ = now;
  ambient_c_ = temp_c;
}

Telemetry SsdModel::telemetry(SimTime now) const {
  Telemetry t;
  t.power = power_;
  t.temperature_c = temperature(now);
  switch (power_) {
    case PowerState::Off:
      t.current_ma = 0;
      break;
    case PowerState::Recovering:
      t.current_ma = cfg_.current.recovery_ma;
      break;
    default: {
      const bool programming = std::any_of(channel_free_.begin(), channel_free_.end(),
                                           [&](SimTime f) { return f > now; });
      bool reading = false;
      for (const auto& [h, c] : live_)
        if (c.cmd.op == OpKind::Read && c.read_done > now) reading = true;
      t.current_ma = programming ? cfg_.current.write_ma : reading ? cfg_.current.read_ma : cfg_.current.idle_ma;
    }
  }
  return t;
}

bool SsdModel::region_error(std::uint64_t address, std::uint64_t len) const {
  if (health_ != Health::MetadataCorruption || !bad_region_) return false;
  return address < bad_region_->second && bad_region_->first < address + len;
}

bool SsdModel::logical_read(std::uint64_t address, std::span<std::uint8_t> out) const {
  if (region_error(address, out.size())) return false;
  nand_.read(address, out);
  if (volatile_.empty()) return true;
  for (std::uint64_t off = 0; off < out.size(); off += kBlockBytes) {
    auto it = volatile_.find((address + off) / kBlockBytes);
    if (it == volatile_.end() || it->second.empty()) continue;
    const auto& ref = it->second.back();
    std::memcpy(out.data() + off, ref.owner->data() + ref.offset, kBlockBytes);
  }
  return true;
}

void SsdModel::admin_write(std::uint64_t address, std::span<const std::uint8_t> data) {
  if (!quiescent()) throw StateError("admin write on a busy device");
  nand_.write(address, data);
}

void SsdModel::emit(CommandHandle h, SimTime t, CompletionKind k, std::shared_ptr<std::vector<std::uint8_t>> data) {
  outbox_.push_back({h, t, k, std::move(data)});
}

void SsdModel::release_slot() {
  if (slots_used_ == 0) throw std::logic_error("ncq slot underflow");
  --slots_used_;
}

void SsdModel::forget_volatile(const Command& c) {
  if (c.cmd.op != OpKind::Write) return;
  const std::uint64_t lo_seq = c.first_seq, hi_seq = c.first_seq + c.cmd.subs.size();
  for (const auto& s : c.cmd.subs) {
    for (std::uint64_t a = s.address; a < s.address + s.size; a += kBlockBytes) {
      auto it = volatile_.find(a / kBlockBytes);
      if (it == volatile_.end()) continue;
      auto& refs = it->second;
      refs.erase(std::remove_if(refs.begin(), refs.end(),
                                [&](const VolatileRef& r) { return r.seq >= lo_seq && r.seq < hi_seq; }),
                 refs.end());
      if (refs.empty()) volatile_.erase(it);
    }
  }
}

SubmitResult SsdModel::submit(const DeviceCommand& cmd, SimTime now) {
  if (now < clock_) throw std::invalid_argument("submit with a clock in the past");
  if (now > clock_) {
    while (auto t = next_internal_event()) {
      if (*t > now) break;
      clock_ = std::max(clock_, *t);
      process_at(clock_);
    }
    clock_ = now;
  }
  if (!accepting()) return {SubmitStatus::Unavailable, 0};
  if (queue_full()) return {SubmitStatus::Backpressure, 0};
  if (cmd.subs.empty()) throw std::invalid_argument("command without sub-requests");

  Command c;
  c.handle = next_handle_++;
  c.cmd = cmd;
  c.lo = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t off = 0;
  for (const auto& s : cmd.subs) {
    if (!block_aligned(s.address) || !block_aligned(s.size) || s.size == 0 ||
        s.address + s.size > cfg_.capacity_bytes)
      throw std::invalid_argument("bad sub-request at " + std::to_string(s.address));
    if (s.size > cfg_.dram_buffer_bytes) throw std::invalid_argument("sub-request larger than the DRAM buffer");
    c.offsets.push_back(off);
    off += s.size;
    c.lo = std::min(c.lo, s.address);
    c.hi = std::max(c.hi, s.address + s.size);
  }
  c.first_seq = next_seq_;
  next_seq_ += cmd.subs.size();
  if (cmd.op == OpKind::Write) {
    if (!cmd.data || cmd.data->size() != off) throw std::invalid_argument("write payload does not match sub-requests");
    for (std::size_t i = 0; i < cmd.subs.size(); ++i) {
      const auto& s = cmd.subs[i];
      for (std::uint64_t k = 0; k < s.size; k += kBlockBytes)
        volatile_[(s.address + k) / kBlockBytes].push_back({c.first_seq + i, cmd.data, c.offsets[i] + k});
    }
  }
  const auto h = c.handle;
  live_.emplace(h, std::move(c));
  ncq_.push_back(h);
  ++slots_used_;
  schedule_programs(now);
  dispatch(now);
  schedule_programs(now);
  return {SubmitStatus::Accepted, h};
}

std::vector<CompletionEvent> SsdModel::tick(SimTime now) {
  if (now < clock_) throw std::invalid_argument("tick with a clock in the past");
  while (auto t = next_internal_event()) {
    if (*t > now) break;
    clock_ = std::max(clock_, *t);
    process_at(clock_);
  }
  clock_ = now;
  return std::exchange(outbox_, {});
}

bool SsdModel::flush_eligible(const Buffered& b, SimTime t) const {
  if (!cfg_.ack_on_buffer) return true;
  if (static_cast<double>(buffer_bytes_) >= cfg_.flush_watermark * static_cast<double>(cfg_.dram_buffer_bytes))
    return true;
  return t - b.admitted >= cfg_.flush_delay_us;
}

std::optional<SimTime> SsdModel::next_event_time() const {
  if (!outbox_.empty()) return clock_;
  return next_internal_event();
}

std::optional<SimTime> SsdModel::next_internal_event() const {
  std::optional<SimTime> best;
  auto consider = [&](SimTime t) {
    if (!best || t < *best) best = t;
  };
  if (scheduled_ > 0) consider(buffer_.front().deadline);
  for (const auto& [h, c] : live_)
    if (c.cmd.op == OpKind::Read && c.read_done >= 0) consider(c.read_done);
  if (power_ == PowerState::FallingVoltage) consider(unavail_at_);
  if (power_ == PowerState::Recovering) consider(ready_at_);
  if (scheduled_ < buffer_.size()) {
    const auto& b = buffer_[scheduled_];
    const SimTime min_free = *std::min_element(channel_free_.begin(), channel_free_.end());
    if (flush_eligible(b, clock_)) consider(std::max(min_free, clock_));
    else consider(std::max(b.admitted + cfg_.flush_delay_us, min_free));
  }
  return best;
}

void SsdModel::process_at(SimTime t) {
  while (scheduled_ > 0 && buffer_.front().deadline <= t) commit_front(t);

  std::vector<CommandHandle> done;
  for (const auto& [h, c] : live_)
    if (c.cmd.op == OpKind::Read && c.read_done >= 0 && c.read_done <= t) done.push_back(h);
  for (auto h : done) {
    auto it = live_.find(h);
    emit(h, t, CompletionKind::Ack, std::move(it->second.read_data));
    release_slot();
    live_.erase(it);
  }

  if (power_ == PowerState::FallingVoltage && unavail_at_ <= t) go_dark(t);
  if (power_ == PowerState::Recovering && ready_at_ <= t) power_ = PowerState::On;
  if (power_ == PowerState::On || power_ == PowerState::FallingVoltage) {
    schedule_programs(t);
    dispatch(t);
    schedule_programs(t);
  }
}

void SsdModel::commit_front(SimTime t) {
  Buffered b = std::move(buffer_.front());
  buffer_.pop_front();
  --scheduled_;
  buffer_bytes_ -= b.size;

  std::span<const std::uint8_t> data(b.owner->data() + b.offset, b.size);
  if (cfg_.effective_p_fly() > 0) {
    DirtyMapEntry e;
    e.address = b.address;
    e.size = b.size;
    e.previous.resize(b.size);
    nand_.read(b.address, e.previous);
    e.owner = b.owner;
    e.offset = b.offset;
    map_dirty_.push_back(std::move(e));
  }
  nand_.write(b.address, data);
  if (++ops_since_checkpoint_ >= cfg_.map_checkpoint_every) {
    map_dirty_.clear();
    ops_since_checkpoint_ = 0;
  }

  for (std::uint64_t a = b.address; a < b.address + b.size; a += kBlockBytes) {
    auto it = volatile_.find(a / kBlockBytes);
    if (it == volatile_.end()) continue;
    auto& refs = it->second;
    refs.erase(std::remove_if(refs.begin(), refs.end(), [&](const VolatileRef& r) { return r.seq == b.seq; }),
               refs.end());
    if (refs.empty()) volatile_.erase(it);
  }

  auto it = live_.find(b.handle);
  if (it == live_.end()) return;
  auto& c = it->second;
  if (++c.committed == c.cmd.subs.size()) {
    if (!c.acked) {
      emit(c.handle, t, CompletionKind::Ack);
      release_slot();
    }
    emit(c.handle, t, CompletionKind::Persisted);
    live_.erase(it);
  }
}

void SsdModel::schedule_programs(SimTime t) {
  while (scheduled_ < buffer_.size()) {
    auto& b = buffer_[scheduled_];
    if (!flush_eligible(b, t)) break;
    auto ch = std::min_element(channel_free_.begin(), channel_free_.end());
    if (*ch > t) break;
    // Deadlines never decrease along the FIFO, so one command's persisted
    // sub-requests always form a prefix.
    const SimTime deadline = std::max(t + scaled(cfg_.program_latency_us, t), last_deadline_);
    *ch = deadline;
    b.deadline = deadline;
    last_deadline_ = deadline;
    ++scheduled_;
  }
}

void SsdModel::capture_read(Command& c, SimTime t) {
  std::uint64_t total = 0;
  for (const auto& s : c.cmd.subs) total += s.size;
  if (c.cmd.capture) {
    auto out = std::make_shared<std::vector<std::uint8_t>>(total);
    std::uint64_t off = 0;
    for (const auto& s : c.cmd.subs) {
      std::span<std::uint8_t> dst(out->data() + off, s.size);
      nand_.read(s.address, dst);
      // Only data from commands submitted before this read is visible.
      for (std::uint64_t k = 0; k < s.size; k += kBlockBytes) {
        auto it = volatile_.find((s.address + k) / kBlockBytes);
        if (it == volatile_.end()) continue;
        for (auto r = it->second.rbegin(); r != it->second.rend(); ++r) {
          if (r->seq < c.first_seq) {
            std::memcpy(dst.data() + k, r->owner->data() + r->offset, kBlockBytes);
            break;
          }
        }
      }
      off += s.size;
    }
    c.read_data = std::move(out);
  }
  c.read_done = t + scaled(cfg_.read_latency_us * static_cast<SimTime>(c.cmd.subs.size()), t);
}

void SsdModel::dispatch(SimTime t) {
  std::vector<Command*> queued;
  std::vector<Command*> candidates;
  while (!ncq_.empty()) {
    queued.clear();
    for (auto h : ncq_) queued.push_back(&live_.at(h));
    candidates.clear();
    for (std::size_t i = 0; i < queued.size(); ++i) {
      Command* c = queued[i];
      bool blocked = false;
      for (std::size_t j = 0; j < i && !blocked; ++j) {
        const Command* e = queued[j];
        const bool conflict = c->cmd.op == OpKind::Write || e->cmd.op == OpKind::Write;
        blocked = conflict && e->lo < c->hi && c->lo < e->hi;
      }
      if (blocked) continue;
      if (c->cmd.op == OpKind::Write &&
          c->cmd.subs[c->next_sub].size > cfg_.dram_buffer_bytes - buffer_bytes_)
        continue;
      candidates.push_back(c);
    }
    if (candidates.empty()) break;
    Command* c = candidates[rng_.below(candidates.size())];

    auto leave_ncq = [&] {
      c->in_ncq = false;
      ncq_.erase(std::find(ncq_.begin(), ncq_.end(), c->handle));
    };

    if (c->next_sub == 0 && region_error(c->lo, c->hi - c->lo)) {
      leave_ncq();
      emit(c->handle, t, CompletionKind::Error);
      release_slot();
      forget_volatile(*c);
      live_.erase(c->handle);
      continue;
    }
    if (c->cmd.op == OpKind::Read) {
      capture_read(*c, t);
      leave_ncq();
      continue;
    }

    const auto i = c->next_sub++;
    const auto& s = c->cmd.subs[i];
    Buffered b;
    b.handle = c->handle;
    b.sub = i;
    b.address = s.address;
    b.size = s.size;
    b.seq = c->first_seq + i;
    b.owner = c->cmd.data;
    b.offset = c->offsets[i];
    b.admitted = t;
    buffer_.push_back(std::move(b));
    buffer_bytes_ += s.size;
    if (c->next_sub == c->cmd.subs.size()) {
      leave_ncq();
      if (cfg_.ack_on_buffer) {
        c->acked = true;
        emit(c->handle, t, CompletionKind::Ack);
        release_slot();
      }
    }
  }
}

void SsdModel::power_cut(SimTime now) {
  tick(now);
  if (power_ != PowerState::On) throw StateError(std::string("power cut while ") + to_string(power_));
  power_ = PowerState::FallingVoltage;
  unavail_at_ = now + cfg_.power.t_unavail_us;
  ++power_cycles_;
  roll_hazards();
}

// Hazards draw from their own stream so the outcome of each power cycle does
// not depend on how much randomness the workload consumed before it.
void SsdModel::roll_hazards() {
  const double u_chip = hazard_rng_.unit(), u_iface = hazard_rng_.unit(), u_meta = hazard_rng_.unit();
  const auto region_start_draw = hazard_rng_.next();
  if (health_ != Health::Healthy) return;
  if (u_chip < cfg_.dead_hazards.chip) {
    health_ = Health::ChipFailure;
  } else if (u_iface < cfg_.dead_hazards.interface) {
    health_ = Health::InterfaceCorruption;
  } else if (u_meta < cfg_.dead_hazards.metadata) {
    health_ = Health::MetadataCorruption;
    const auto blocks = nand_.block_count();
    auto len = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(static_cast<double>(blocks) * cfg_.metadata_region_fraction));
    const auto start = region_start_draw % (blocks - len + 1);
    bad_region_ = std::make_pair(start * kBlockBytes, (start + len) * kBlockBytes);
  }
}

void SsdModel::go_dark(SimTime t) {
  if (cfg_.plp) {
    // Capacitor-backed flush: every transferred sub-request reaches NAND.
    while (!buffer_.empty()) {
      Buffered b = std::move(buffer_.front());
      buffer_.pop_front();
      nand_.write(b.address, std::span<const std::uint8_t>(b.owner->data() + b.offset, b.size));
      auto it = live_.find(b.handle);
      if (it != live_.end() && ++it->second.committed == it->second.cmd.subs.size() && it->second.acked) {
        emit(b.handle, t, CompletionKind::Persisted);
        live_.erase(it);
      }
    }
  } else {
    fly_dirty_entries();
    tear_programs(t);
  }

  for (auto& [h, c] : live_) {
    if (c.acked) emit(h, t, CompletionKind::Lost);
    else emit(h, t, CompletionKind::Aborted);
  }
  live_.clear();
  ncq_.clear();
  slots_used_ = 0;
  buffer_.clear();
  scheduled_ = 0;
  buffer_bytes_ = 0;
  last_deadline_ = 0;
  std::fill(channel_free_.begin(), channel_free_.end(), 0);
  volatile_.clear();
  map_dirty_.clear();
  ops_since_checkpoint_ = 0;
  power_ = PowerState::Off;
}

void SsdModel::fly_dirty_entries() {
  const double p = cfg_.effective_p_fly();
  for (std::size_t i = 0; i < map_dirty_.size(); ++i) {
    const auto& e = map_dirty_[i];
    bool superseded = false;
    for (std::size_t j = i + 1; j < map_dirty_.size() && !superseded; ++j)
      superseded = map_dirty_[j].address < e.address + e.size && e.address < map_dirty_[j].address + map_dirty_[j].size;
    if (!rng_.chance(p) || superseded) continue;
    const auto slots = (cfg_.capacity_bytes - e.size) / kBlockBytes + 1;
    std::optional<std::uint64_t> target;
    for (int attempt = 0; attempt < 32 && !target; ++attempt) {
      const auto a = rng_.below(slots) * kBlockBytes;
      if (a + e.size <= e.address || a >= e.address + e.size) target = a;
    }
    if (!target) continue;
    // The map entry never reached flash: the old mapping comes back and the
    // programmed pages are reachable only through the wrong address.
    nand_.write(e.address, e.previous);
    nand_.write(*target, std::span<const std::uint8_t>(e.owner->data() + e.offset, e.size));
    relocations_.push_back({e.address, *target, e.size});
  }
}

void SsdModel::tear_programs(SimTime t) {
  std::vector<std::uint8_t> junk;
  for (std::size_t i = 0; i < scheduled_; ++i) {
    const auto& b = buffer_[i];
    if (b.deadline <= t || !torn_rng_.chance(cfg_.p_torn_program)) continue;
    junk.resize(b.size);
    torn_rng_.fill(junk.data(), junk.size());
    nand_.write(b.address, junk);
  }
}

std::optional<SimTime> SsdModel::power_on(SimTime now) {
  tick(now);
  if (power_ != PowerState::Off) throw StateError(std::string("power on while ") + to_string(power_));
  if (health_ == Health::ChipFailure) return std::nullopt;
  power_ = PowerState::Recovering;
  ready_at_ = now + cfg_.recovery_us;
  return ready_at_;
}

}  // namespace ssdrel
