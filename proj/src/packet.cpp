#include "ssdrel/packet.hpp"

#include <algorithm>

namespace ssdrel {

const char* to_string(OpKind k) { return k == OpKind::Read ? "read" : "write"; }

const char* to_string(SequenceTag t) {
  switch (t) {
    case SequenceTag::RAR: return "RAR";
    case SequenceTag::RAW: return "RAW";
    case SequenceTag::WAR: return "WAR";
    case SequenceTag::WAW: return "WAW";
    case SequenceTag::Untagged: break;
  }
  return "untagged";
}

const char* to_string(Origin o) { return o == Origin::App ? "app" : "promotion"; }

bool parse_op_kind(std::string_view s, OpKind& out) {
  if (s == "read") out = OpKind::Read;
  else if (s == "write") out = OpKind::Write;
  else return false;
  return true;
}

bool parse_sequence_tag(std::string_view s, SequenceTag& out) {
  for (auto t : {SequenceTag::Untagged, SequenceTag::RAR, SequenceTag::RAW, SequenceTag::WAR,
                 SequenceTag::WAW}) {
    if (s == to_string(t)) {
      out = t;
      return true;
    }
  }
  return false;
}

bool parse_origin(std::string_view s, Origin& out) {
  if (s == "app") out = Origin::App;
  else if (s == "promotion") out = Origin::Promotion;
  else return false;
  return true;
}

DataPacket build_packet(OpKind op, std::uint64_t address, std::span<const std::uint8_t> payload,
                        SimTime clock, std::span<const std::uint8_t> initial_snapshot,
                        const PacketOptions& opts) {
  if (opts.max_sub_bytes == 0) throw std::invalid_argument("max_sub_bytes must be positive");
  if (payload.empty()) throw std::invalid_argument("empty request");
  if (!block_aligned(address) || !block_aligned(payload.size()))
    throw AlignmentError("request not aligned to 4 KiB: address " + std::to_string(address) +
                         " size " + std::to_string(payload.size()));
  if (initial_snapshot.size() != payload.size())
    throw std::invalid_argument("initial snapshot does not cover the request");

  DataPacket p;
  p.op_kind = op;
  p.address = address;
  p.size_bytes = payload.size();
  p.queue_time = clock;
  p.initial_checksum = checksum(initial_snapshot);

  const std::size_t n = (payload.size() + opts.max_sub_bytes - 1) / opts.max_sub_bytes;
  p.sub_requests.reserve(n);
  Checksum64 whole{};
  std::uint64_t off = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = std::min<std::uint64_t>(opts.max_sub_bytes, payload.size() - off);
    auto part = payload.subspan(off, len);
    SubRequest s;
    s.id = i;
    s.size_bytes = static_cast<std::uint32_t>(len);
    s.address = address + off;
    s.data_checksum = checksum(part);
    if (opts.keep_payload && op == OpKind::Write) s.payload.assign(part.begin(), part.end());
    whole = i == 0 ? s.data_checksum : checksum_combine(whole, s.data_checksum, len);
    p.sub_requests.push_back(std::move(s));
    off += len;
  }
  p.data_checksum = whole;
  return p;
}

std::vector<Checksum64> sub_checksums(const DataPacket& packet,
                                      std::span<const std::uint8_t> snapshot) {
  if (snapshot.size() != packet.size_bytes)
    throw std::invalid_argument("snapshot does not cover the packet range");
  std::vector<Checksum64> out;
  out.reserve(packet.sub_requests.size());
  std::uint64_t off = 0;
  for (const auto& s : packet.sub_requests) {
    out.push_back(checksum(snapshot.subspan(off, s.size_bytes)));
    off += s.size_bytes;
  }
  return out;
}

void finalize_packet(DataPacket& packet, std::span<const std::uint8_t> final_snapshot,
                     SimTime completion_clock) {
  if (packet.final_checksum) throw StateError("packet " + std::to_string(packet.id) + " already finalized");
  if (completion_clock < packet.queue_time)
    throw std::invalid_argument("completion precedes queue time");
  auto subs = sub_checksums(packet, final_snapshot);
  Checksum64 whole{};
  for (std::size_t i = 0; i < subs.size(); ++i) {
    packet.sub_requests[i].final_checksum = subs[i];
    whole = i == 0 ? subs[i] : checksum_combine(whole, subs[i], packet.sub_requests[i].size_bytes);
  }
  packet.final_checksum = whole;
  packet.complete_time = completion_clock;
}

}  // namespace ssdrel
