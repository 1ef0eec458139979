#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdrel/packet.hpp"
#include "ssdrel/units.hpp"

namespace ssdrel {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class AccessPattern : std::uint8_t { UniformRandom, Sequential, Trace };
enum class SequenceMode : std::uint8_t { Mixed, RAR, RAW, WAR, WAW };

const char* to_string(AccessPattern p);
const char* to_string(SequenceMode m);
bool parse_access_pattern(std::string_view s, AccessPattern& out);
bool parse_sequence_mode(std::string_view s, SequenceMode& out);

/// Request size distribution. Uniform draws whole 4 KiB blocks in [min, max].
struct SizeDist {
  enum class Kind : std::uint8_t { Fixed, Uniform };
  Kind kind = Kind::Uniform;
  std::uint64_t min_bytes = 4 * KiB;
  std::uint64_t max_bytes = 1 * MiB;

  static SizeDist fixed(std::uint64_t n) { return {Kind::Fixed, n, n}; }
  static SizeDist uniform(std::uint64_t lo, std::uint64_t hi) { return {Kind::Uniform, lo, hi}; }
  double mean_bytes() const { return (static_cast<double>(min_bytes) + static_cast<double>(max_bytes)) / 2; }
  bool operator==(const SizeDist&) const = default;
};

inline constexpr double kUnlimitedIops = std::numeric_limits<double>::infinity();

struct WorkloadSpec {
  std::uint64_t wss_bytes = 64 * MiB;
  double read_fraction = 0.0;
  SizeDist size = SizeDist::uniform(4 * KiB, 1 * MiB);
  AccessPattern pattern = AccessPattern::UniformRandom;
  std::string trace_path;
  double target_iops = 2400;
  SequenceMode sequence_mode = SequenceMode::Mixed;
  std::uint64_t request_count = 2400;
  std::uint64_t seed = 1;

  /// Throws SpecError describing the first invalid field.
  void validate() const;
};

struct IoRequest {
  std::uint64_t index = 0;
  OpKind op = OpKind::Write;
  std::uint64_t address = 0;
  std::uint64_t size_bytes = 0;
  std::uint32_t issuer_id = 0;
  SequenceTag tag = SequenceTag::Untagged;
  SimTime trace_time = 0;  // original timestamp for replayed traces
  SimTime issue_time = 0;  // assigned by pace()

  bool operator==(const IoRequest&) const = default;
};

/// Pairs of a sequence mode are spread over groups of this many requests.
inline constexpr std::size_t kSequenceWindow = 8;

std::vector<IoRequest> generate(const WorkloadSpec& spec);

/// Reads `timestamp_us op address_bytes size_bytes` rows; `op` is R/W.
/// Blank lines and lines starting with '#' are skipped. Addresses are mapped
/// modulo wss_bytes and aligned down to 4 KiB; sizes are rounded up to 4 KiB.
/// Throws ParseError whose offset is the 1-based line number.
std::vector<IoRequest> replay_trace(const std::string& path, std::uint64_t wss_bytes);
std::vector<IoRequest> read_trace(std::istream& in, std::uint64_t wss_bytes);
void write_trace(std::ostream& out, const std::vector<IoRequest>& requests);

/// Synthetic stand-in for a Cello99-style trace: 8 KiB requests in short
/// sequential runs separated by random jumps.
std::vector<IoRequest> make_cello_like(std::uint64_t seed, std::size_t count, std::uint64_t span_bytes,
                                       double read_fraction);

/// Assigns issue times start + floor(i * 1e6 / target_iops). kUnlimitedIops
/// puts every request at `start`.
void pace(std::vector<IoRequest>& requests, double target_iops, SimTime start);

}  // namespace ssdrel
