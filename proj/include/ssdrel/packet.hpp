#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdrel/checksum.hpp"
#include "ssdrel/units.hpp"

namespace ssdrel {

enum class OpKind : std::uint8_t { Read, Write };
enum class SequenceTag : std::uint8_t { Untagged, RAR, RAW, WAR, WAW };
/// Which path produced the write: the application or a cache promotion.
enum class Origin : std::uint8_t { App, Promotion };

const char* to_string(OpKind k);
const char* to_string(SequenceTag t);
const char* to_string(Origin o);
bool parse_op_kind(std::string_view s, OpKind& out);
bool parse_sequence_tag(std::string_view s, SequenceTag& out);
bool parse_origin(std::string_view s, Origin& out);

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct SubRequest {
  std::uint32_t id = 0;
  std::uint32_t size_bytes = 0;
  std::uint64_t address = 0;
  Checksum64 data_checksum;
  std::optional<Checksum64> final_checksum;
  /// Empty when the payload is not retained (reads, or databases written
  /// without payloads).
  std::vector<std::uint8_t> payload;

  bool operator==(const SubRequest&) const = default;
};

struct DataPacket {
  std::uint64_t id = 0;
  OpKind op_kind = OpKind::Write;
  SequenceTag sequence_tag = SequenceTag::Untagged;
  Origin origin = Origin::App;
  std::uint32_t issuer_id = 0;
  std::uint64_t size_bytes = 0;
  std::uint64_t address = 0;
  SimTime queue_time = 0;
  std::optional<SimTime> complete_time;
  Checksum64 initial_checksum;
  Checksum64 data_checksum;
  std::optional<Checksum64> final_checksum;
  std::vector<SubRequest> sub_requests;

  bool finalized() const { return final_checksum.has_value(); }
  bool operator==(const DataPacket&) const = default;
};

struct PacketOptions {
  std::uint64_t max_sub_bytes = kDefaultMaxSubBytes;
  bool keep_payload = true;
};

/// Splits a request into sub-requests and computes every checksum field.
///
/// For reads `payload` holds the bytes read (checksums only are recorded).
/// Throws AlignmentError when address or size is not a multiple of 4 KiB.
DataPacket build_packet(OpKind op, std::uint64_t address, std::span<const std::uint8_t> payload,
                        SimTime clock, std::span<const std::uint8_t> initial_snapshot,
                        const PacketOptions& opts = {});

/// Sets the final checksums from the bytes read back after the ack.
/// Throws StateError on a second call.
void finalize_packet(DataPacket& packet, std::span<const std::uint8_t> final_snapshot,
                     SimTime completion_clock);

/// Per-sub checksums of a snapshot covering the packet's range, in id order.
std::vector<Checksum64> sub_checksums(const DataPacket& packet,
                                      std::span<const std::uint8_t> snapshot);

/// Packet database records: one JSON object per line.
std::string encode_record(const DataPacket& packet);
DataPacket decode_record(std::string_view line);

}  // namespace ssdrel
