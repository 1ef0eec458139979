#include "ssdrel/cache_stack.hpp"

#include <algorithm>
#include <cstring>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace ssdrel {

const char* to_string(CachePolicy p) {
  switch (p) {
    case CachePolicy::WriteBack: return "WB";
    case CachePolicy::WriteThrough: return "WT";
    case CachePolicy::ReadOnly: return "RO";
  }
  return "?";
}

bool parse_cache_policy(std::string_view s, CachePolicy& out) {
  if (s == "WB" || s == "write_back") out = CachePolicy::WriteBack;
  else if (s == "WT" || s == "write_through") out = CachePolicy::WriteThrough;
  else if (s == "RO" || s == "read_only") out = CachePolicy::ReadOnly;
  else return false;
  return true;
}

namespace {

std::uint64_t default_cache_bytes(std::uint64_t backing) {
  return backing / 5 / kBlockBytes * kBlockBytes;
}

}  // namespace

CacheStack::CacheStack(CacheConfig cache, RaidConfig raid, BackingConfig backing, SsdConfig primary,
                       SsdConfig secondary)
    : cache_(cache),
      raid_(raid),
      backing_cfg_(backing),
      capacity_blocks_(0),
      devices_{SsdModel(std::move(primary)), SsdModel(std::move(secondary))},
      backing_(backing.capacity_bytes) {
  if (cache_.block_bytes != kBlockBytes) throw std::invalid_argument("cache block size must be 4 KiB");
  if (cache_.cache_bytes == 0) cache_.cache_bytes = default_cache_bytes(backing.capacity_bytes);
  if (!block_aligned(cache_.cache_bytes) || cache_.cache_bytes == 0)
    throw std::invalid_argument("cache size must be a positive multiple of 4 KiB");
  if (backing.seek_us < 0 || !(backing.bytes_per_us > 0)) throw std::invalid_argument("bad backing store timing");
  for (const auto& d : devices_)
    if (d.config().capacity_bytes < backing.capacity_bytes)
      throw std::invalid_argument("cache devices smaller than the backing store");
  capacity_blocks_ = cache_.cache_bytes / kBlockBytes;
  if (raid_.scrub_interval_us > 0) next_scrub_ = raid_.scrub_interval_us;
}

bool CacheStack::dirty(std::uint64_t block) const {
  auto it = tags_.find(block);
  return it != tags_.end() && it->second.dirty;
}

bool CacheStack::accepting() const { return devices_[0].accepting() || devices_[1].accepting(); }

bool CacheStack::raid_writable() const { return accepting(); }

bool CacheStack::degraded() const {
  return devices_[0].permanently_failed() != devices_[1].permanently_failed();
}

bool CacheStack::idle() const {
  return ops_.empty() && hdd_.empty() && pending_[0].empty() && pending_[1].empty() &&
         devices_[0].quiescent() && devices_[1].quiescent();
}

std::uint32_t CacheStack::depth(int d) const {
  return devices_[d].outstanding() + static_cast<std::uint32_t>(pending_[d].size());
}

std::optional<int> CacheStack::route_read() const {
  auto up = [&](int d) { return devices_[d].accepting(); };
  if (up(0) && depth(0) <= raid_.busy_threshold) return 0;
  if (up(1)) return 1;
  if (up(0)) return 0;
  return std::nullopt;
}

OpId CacheStack::new_op(OpKindTag kind, std::uint64_t address, std::uint64_t size, bool notify) {
  const OpId id = next_op_++;
  Op op;
  op.kind = kind;
  op.address = address;
  op.size = size;
  op.notify = notify;
  ops_.emplace(id, op);
  return id;
}

void CacheStack::finish(OpId id, SimTime t) {
  auto it = ops_.find(id);
  const Op& op = it->second;
  const bool is_write = op.kind != OpKindTag::AppRead;
  const bool via_raid = op.kind == OpKindTag::Promotion || op.kind == OpKindTag::Insert ||
                        (op.kind == OpKindTag::AppWrite && cache_.policy == CachePolicy::WriteBack);
  const bool error = is_write && via_raid ? op.acks == 0 : op.error;
  if (op.notify) {
    StackEvent e;
    e.kind = StackEventKind::Completed;
    e.op = id;
    e.time = t;
    e.error = error;
    e.promotion = op.kind == OpKindTag::Promotion;
    e.address = op.address;
    out_.push_back(std::move(e));
  }
  ops_.erase(it);
}

void CacheStack::part_done(OpId id, SimTime t, bool ok) {
  auto it = ops_.find(id);
  if (it == ops_.end()) return;
  auto& op = it->second;
  if (ok) ++op.acks;
  else op.error = true;
  if (--op.parts == 0) finish(id, t);
}

DeviceCommand CacheStack::make_write(std::uint64_t address, std::shared_ptr<const Bytes> payload) const {
  DeviceCommand cmd;
  cmd.op = OpKind::Write;
  for (std::uint64_t off = 0; off < payload->size(); off += kDefaultMaxSubBytes) {
    const auto len = std::min<std::uint64_t>(kDefaultMaxSubBytes, payload->size() - off);
    cmd.subs.push_back({address + off, static_cast<std::uint32_t>(len)});
  }
  cmd.data = std::move(payload);
  return cmd;
}

void CacheStack::overlay_add(int d, const HostCmd& c) {
  if (c.cmd.op != OpKind::Write) return;
  std::uint64_t off = 0;
  for (const auto& s : c.cmd.subs) {
    for (std::uint64_t k = 0; k < s.size; k += kBlockBytes) {
      auto& refs = overlay_[d][(s.address + k) / kBlockBytes];
      OverlayRef r{c.seq, c.cmd.data, off + k};
      auto pos = std::upper_bound(refs.begin(), refs.end(), c.seq,
                                  [](std::uint64_t seq, const OverlayRef& x) { return seq < x.seq; });
      refs.insert(pos, std::move(r));
    }
    off += s.size;
  }
}

void CacheStack::overlay_remove(int d, const HostCmd& c) {
  if (c.cmd.op != OpKind::Write) return;
  for (const auto& s : c.cmd.subs) {
    for (std::uint64_t k = 0; k < s.size; k += kBlockBytes) {
      auto it = overlay_[d].find((s.address + k) / kBlockBytes);
      if (it == overlay_[d].end()) continue;
      auto& refs = it->second;
      refs.erase(std::remove_if(refs.begin(), refs.end(), [&](const OverlayRef& r) { return r.seq == c.seq; }),
                 refs.end());
      if (refs.empty()) overlay_[d].erase(it);
    }
  }
}

void CacheStack::enqueue(int d, HostCmd cmd) {
  overlay_add(d, cmd);
  pending_[d].push_back(std::move(cmd));
}

void CacheStack::pump(int d, SimTime now) {
  auto& dev = devices_[d];
  if (dev.permanently_failed()) {
    drop_dead_device(d, now);
    return;
  }
  if (hold_[d]) return;
  while (!pending_[d].empty()) {
    auto r = dev.submit(pending_[d].front().cmd, now);
    if (r.status == SubmitStatus::Backpressure) break;
    if (r.status == SubmitStatus::Unavailable) {
      hold_[d] = true;
      break;
    }
    HostCmd c = std::move(pending_[d].front());
    pending_[d].pop_front();
    overlay_remove(d, c);
    inflight_[d].emplace(r.handle, std::move(c));
  }
}

void CacheStack::drop_dead_device(int d, SimTime now) {
  std::vector<OpId> failed;
  for (auto& c : pending_[d]) failed.push_back(c.op);
  for (auto& [h, c] : inflight_[d]) failed.push_back(c.op);
  pending_[d].clear();
  inflight_[d].clear();
  unflushed_[d].clear();
  overlay_[d].clear();
  for (auto id : failed) part_done(id, now, false);
}

void CacheStack::mirror_write(OpId id, std::uint64_t address, std::shared_ptr<const Bytes> payload, SimTime now) {
  const auto cmd = make_write(address, std::move(payload));
  const auto seq = next_seq_++;
  int targets = 0;
  for (int d = 0; d < 2; ++d) {
    if (devices_[d].permanently_failed()) continue;
    enqueue(d, HostCmd{id, cmd, seq});
    ++ops_.at(id).parts;
    ++device_writes_[d];
    ++targets;
  }
  if (targets == 0) {
    finish(id, now);
    return;
  }
  for (int d = 0; d < 2; ++d) pump(d, now);
}

void CacheStack::invalidate(std::uint64_t block) {
  auto it = tags_.find(block);
  if (it == tags_.end()) return;
  lru_.erase(it->second.lru);
  tags_.erase(it);
}

void CacheStack::evict_one(SimTime /*now*/) {
  const auto victim = lru_.back();
  auto it = tags_.find(victim);
  if (it->second.dirty) {
    // Write-back of the cached copy, whatever the devices currently hold.
    std::vector<std::uint8_t> buf(kBlockBytes);
    read_view(victim * kBlockBytes, buf);
    backing_.write(victim * kBlockBytes, buf);
  }
  lru_.pop_back();
  tags_.erase(it);
}

void CacheStack::touch_or_allocate(std::uint64_t block, bool dirty, SimTime now, bool provisional) {
  auto it = tags_.find(block);
  if (it != tags_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.lru);
    it->second.dirty = it->second.dirty || dirty;
    return;
  }
  if (tags_.size() >= capacity_blocks_) evict_one(now);
  lru_.push_front(block);
  Tag t{lru_.begin(), dirty, provisional, {}};
  for (int d = 0; d < 2; ++d) t.alloc_stamp[d] = devices_[d].nand().stamp(block);
  tags_.emplace(block, t);
}

void CacheStack::revert_lost(int d, std::uint64_t lo, std::uint64_t hi) {
  // Metadata is read back from the primary while it lives.
  const int meta = devices_[0].permanently_failed() ? 1 : 0;
  if (d != meta) return;
  for (auto b = lo / kBlockBytes; b < hi / kBlockBytes; ++b) {
    auto it = tags_.find(b);
    if (it == tags_.end() || !it->second.provisional) continue;
    if (devices_[d].nand().stamp(b) != it->second.alloc_stamp[d]) {
      it->second.provisional = false;
      continue;
    }
    lru_.erase(it->second.lru);
    tags_.erase(it);
  }
}

void CacheStack::hdd_enqueue(HddOp op, std::uint64_t bytes, SimTime now) {
  const SimTime start = std::max(now, hdd_busy_until_);
  const auto xfer = static_cast<SimTime>(static_cast<double>(bytes) / backing_cfg_.bytes_per_us);
  op.done = start + backing_cfg_.seek_us + xfer;
  hdd_busy_until_ = op.done;
  hdd_.push_back(std::move(op));
}

OpId CacheStack::write(std::uint64_t address, std::shared_ptr<const Bytes> payload, SimTime now) {
  if (!payload || payload->empty() || !block_aligned(address) || !block_aligned(payload->size()))
    throw std::invalid_argument("unaligned cache write");
  if (address + payload->size() > backing_.capacity_bytes()) throw std::out_of_range("cache write beyond backing store");
  advance(now);
  const auto size = payload->size();
  const OpId id = new_op(OpKindTag::AppWrite, address, size);
  const auto first = address / kBlockBytes, last = (address + size) / kBlockBytes;
  if (cache_.policy == CachePolicy::WriteBack) {
    for (auto b = first; b < last; ++b) touch_or_allocate(b, true, now, true);
    mirror_write(id, address, std::move(payload), now);
  } else {
    for (auto b = first; b < last; ++b) invalidate(b);
    backing_.write(address, *payload);
    ops_.at(id).parts = 1;
    HddOp op;
    op.kind = HddOp::Kind::Write;
    op.op = id;
    hdd_enqueue(std::move(op), size, now);
  }
  return id;
}

OpId CacheStack::read(std::uint64_t address, std::uint64_t size, SimTime now) {
  if (size == 0 || !block_aligned(address) || !block_aligned(size)) throw std::invalid_argument("unaligned cache read");
  if (address + size > backing_.capacity_bytes()) throw std::out_of_range("cache read beyond backing store");
  advance(now);
  const OpId id = new_op(OpKindTag::AppRead, address, size);
  DeviceCommand hit_cmd;
  hit_cmd.op = OpKind::Read;
  std::vector<std::uint64_t> misses;
  for (auto b = address / kBlockBytes; b < (address + size) / kBlockBytes; ++b) {
    if (tags_.count(b)) {
      touch_or_allocate(b, false, now);
      auto& subs = hit_cmd.subs;
      if (!subs.empty() && subs.back().address + subs.back().size == b * kBlockBytes &&
          subs.back().size < kDefaultMaxSubBytes)
        subs.back().size += kBlockBytes;
      else
        subs.push_back({b * kBlockBytes, static_cast<std::uint32_t>(kBlockBytes)});
    } else {
      misses.push_back(b);
    }
  }
  auto& op = ops_.at(id);
  if (!hit_cmd.subs.empty()) {
    if (auto d = route_read()) {
      ++op.parts;
      enqueue(*d, HostCmd{id, std::move(hit_cmd), next_seq_++});
      pump(*d, now);
    } else {
      op.error = true;
    }
  }
  if (!misses.empty()) {
    ++ops_.at(id).parts;
    HddOp h;
    h.kind = HddOp::Kind::ReadMiss;
    h.op = id;
    const auto bytes = misses.size() * kBlockBytes;
    h.blocks = std::move(misses);
    hdd_enqueue(std::move(h), bytes, now);
  }
  if (ops_.at(id).parts == 0) finish(id, now);
  return id;
}

void CacheStack::insert_range(std::uint64_t address, std::uint64_t size, SimTime t) {
  if (!raid_writable()) return;
  auto data = std::make_shared<Bytes>(size);
  backing_.read(address, *data);
  for (auto b = address / kBlockBytes; b < (address + size) / kBlockBytes; ++b) touch_or_allocate(b, false, t);
  const OpId id = new_op(OpKindTag::Insert, address, size, false);
  mirror_write(id, address, std::move(data), t);
}

void CacheStack::handle_hdd(const HddOp& h, SimTime t) {
  switch (h.kind) {
    case HddOp::Kind::Write: {
      auto it = ops_.find(h.op);
      const auto addr = it->second.address, size = it->second.size;
      part_done(h.op, t, true);
      if (cache_.policy == CachePolicy::WriteThrough) insert_range(addr, size, t);
      break;
    }
    case HddOp::Kind::ReadMiss: {
      // Only missed blocks are promoted (no prefetch); each contiguous run of
      // them that is still uncached goes out as one mirrored write.
      const bool writable = raid_writable();
      std::size_t i = 0;
      while (writable && i < h.blocks.size()) {
        if (tags_.count(h.blocks[i])) {
          ++i;
          continue;
        }
        std::size_t j = i + 1;
        while (j < h.blocks.size() && h.blocks[j] == h.blocks[j - 1] + 1 && !tags_.count(h.blocks[j])) ++j;
        const auto addr = h.blocks[i] * kBlockBytes;
        const auto size = (j - i) * kBlockBytes;
        auto data = std::make_shared<Bytes>(size);
        backing_.read(addr, *data);
        for (auto k = i; k < j; ++k) touch_or_allocate(h.blocks[k], false, t);
        const OpId id = new_op(OpKindTag::Promotion, addr, size);
        StackEvent e;
        e.kind = StackEventKind::PromotionIssued;
        e.op = id;
        e.time = t;
        e.promotion = true;
        e.address = addr;
        e.data = data;
        out_.push_back(std::move(e));
        mirror_write(id, addr, std::move(data), t);
        i = j;
      }
      part_done(h.op, t, true);
      break;
    }
    case HddOp::Kind::Evict:
      break;
  }
}

void CacheStack::handle_device_event(int d, const CompletionEvent& e) {
  if (e.kind == CompletionKind::Persisted || e.kind == CompletionKind::Lost) {
    auto u = unflushed_[d].find(e.handle);
    if (u == unflushed_[d].end()) return;
    if (e.kind == CompletionKind::Lost) revert_lost(d, u->second.first, u->second.second);
    unflushed_[d].erase(u);
    return;
  }
  auto it = inflight_[d].find(e.handle);
  if (it == inflight_[d].end()) return;
  switch (e.kind) {
    case CompletionKind::Ack:
    case CompletionKind::Error: {
      const auto op = it->second.op;
      if (e.kind == CompletionKind::Ack && it->second.cmd.op == OpKind::Write) {
        auto o = ops_.find(op);
        if (o != ops_.end() && o->second.kind == OpKindTag::AppWrite) {
          const auto& subs = it->second.cmd.subs;
          unflushed_[d].emplace(e.handle, std::make_pair(subs.front().address, subs.back().address + subs.back().size));
        }
      }
      inflight_[d].erase(it);
      part_done(op, e.time, e.kind == CompletionKind::Ack);
      break;
    }
    case CompletionKind::Aborted: {
      HostCmd c = std::move(it->second);
      inflight_[d].erase(it);
      overlay_add(d, c);
      auto pos = std::upper_bound(pending_[d].begin(), pending_[d].end(), c.seq,
                                  [](std::uint64_t seq, const HostCmd& x) { return seq < x.seq; });
      pending_[d].insert(pos, std::move(c));
      hold_[d] = true;
      break;
    }
    case CompletionKind::Persisted:
    case CompletionKind::Lost:
      break;
  }
}

std::optional<SimTime> CacheStack::next_internal_event() const {
  std::optional<SimTime> best;
  auto consider = [&](std::optional<SimTime> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  consider(devices_[0].next_event_time());
  consider(devices_[1].next_event_time());
  if (!hdd_.empty()) consider(hdd_.front().done);
  if (next_scrub_ >= 0) consider(next_scrub_);
  return best;
}

std::optional<SimTime> CacheStack::next_event_time() const {
  if (!out_.empty()) return clock_;
  return next_internal_event();
}

void CacheStack::advance(SimTime now) {
  if (now < clock_) throw std::invalid_argument("tick with a clock in the past");
  while (true) {
    auto t = next_internal_event();
    if (!t || *t > now) break;
    const SimTime at = std::max(*t, clock_);
    clock_ = at;
    for (int d = 0; d < 2; ++d)
      for (const auto& e : devices_[d].tick(at)) handle_device_event(d, e);
    while (!hdd_.empty() && hdd_.front().done <= at) {
      HddOp h = std::move(hdd_.front());
      hdd_.pop_front();
      handle_hdd(h, at);
    }
    if (next_scrub_ >= 0 && next_scrub_ <= at) {
      scrub(at);
      next_scrub_ = at + raid_.scrub_interval_us;
    }
    for (int d = 0; d < 2; ++d) pump(d, at);
  }
  clock_ = now;
  for (int d = 0; d < 2; ++d)
    for (const auto& e : devices_[d].tick(now)) handle_device_event(d, e);
  for (int d = 0; d < 2; ++d) pump(d, now);
}

std::vector<StackEvent> CacheStack::tick(SimTime now) {
  advance(now);
  return std::exchange(out_, {});
}

void CacheStack::device_view(int d, std::uint64_t address, std::span<std::uint8_t> out) const {
  if (!devices_[d].logical_read(address, out)) {
    // Unreadable region: the other mirror answers, else the read returns zeros.
    const int other = 1 - d;
    if (devices_[other].permanently_failed() || !devices_[other].logical_read(address, out))
      std::fill(out.begin(), out.end(), 0);
  }
  for (std::uint64_t off = 0; off < out.size(); off += kBlockBytes) {
    auto it = overlay_[d].find((address + off) / kBlockBytes);
    if (it == overlay_[d].end() || it->second.empty()) continue;
    const auto& r = it->second.back();
    std::memcpy(out.data() + off, r.owner->data() + r.offset, kBlockBytes);
  }
}

void CacheStack::read_view(std::uint64_t address, std::span<std::uint8_t> out) const {
  int d = 0;
  if (auto r = route_read()) d = *r;
  else if (devices_[0].permanently_failed()) d = 1;
  const bool dead = devices_[d].permanently_failed();
  std::uint64_t off = 0;
  while (off < out.size()) {
    const auto block = (address + off) / kBlockBytes;
    const bool hit = tags_.count(block) != 0;
    std::uint64_t end = off + kBlockBytes;
    while (end < out.size() && (tags_.count((address + end) / kBlockBytes) != 0) == hit) end += kBlockBytes;
    auto part = out.subspan(off, end - off);
    if (!hit) backing_.read(address + off, part);
    else if (dead) std::fill(part.begin(), part.end(), 0);
    else device_view(d, address + off, part);
    off = end;
  }
}

std::optional<std::vector<std::uint64_t>> CacheStack::scrub(SimTime /*now*/) {
  for (const auto& d : devices_)
    if (d.power() != PowerState::On || d.permanently_failed() || !d.quiescent()) return std::nullopt;
  std::vector<std::uint64_t> blocks;
  blocks.reserve(tags_.size());
  for (const auto& [b, t] : tags_) blocks.push_back(b);
  std::sort(blocks.begin(), blocks.end());
  std::vector<std::uint64_t> repaired;
  std::vector<std::uint8_t> a(kBlockBytes), b(kBlockBytes);
  for (auto blk : blocks) {
    const auto addr = blk * kBlockBytes;
    if (!devices_[0].logical_read(addr, a)) continue;
    if (devices_[1].logical_read(addr, b) && a == b) continue;
    if (devices_[1].region_error(addr, kBlockBytes)) continue;
    devices_[1].admin_write(addr, a);
    repaired.push_back(addr);
  }
  return repaired;
}

void CacheStack::resume(SimTime now) {
  advance(now);
  hold_ = {false, false};
  for (int d = 0; d < 2; ++d) pump(d, now);
}

std::string CacheStack::dump_state() const {
  nlohmann::ordered_json j;
  j["policy"] = to_string(cache_.policy);
  j["capacity_blocks"] = capacity_blocks_;
  j["cached_blocks"] = tags_.size();
  auto lru = nlohmann::ordered_json::array();
  for (auto b : lru_) lru.push_back({{"address", b * kBlockBytes}, {"dirty", tags_.at(b).dirty}});
  j["lru"] = std::move(lru);
  return j.dump(2);
}

}  // namespace ssdrel
