#pragma once

#include <vector>

#include "ssdrel/block_store.hpp"
#include "ssdrel/detector.hpp"
#include "ssdrel/packet.hpp"

namespace ssdrel {

/// Classifies write packets against a disk image, with no access to the
/// request stream: the WAW sequence tag stands in for the overlap check, and
/// a packet without a completion time counts as timed out. Reads are skipped.
/// FWA and InconsistentRecord verdicts get a flying-write scan when enabled.
///
/// Parallel over packets. Throws OutputError if the image does not cover a
/// packet that needs its final bytes.
std::vector<VerdictRecord> classify_image(const std::vector<DataPacket>& packets, const BlockStore& image,
                                          const DetectorConfig& cfg);

/// Serial reference with byte-level flying scans.
std::vector<VerdictRecord> classify_image_serial(const std::vector<DataPacket>& packets, const BlockStore& image,
                                                 const DetectorConfig& cfg);

}  // namespace ssdrel
