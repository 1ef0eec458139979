#include "ssdrel/offline_classify.hpp"

#include <optional>

#include "ssdrel/flying_scan.hpp"
#include "ssdrel/report.hpp"

namespace ssdrel {

namespace {

SimTime response_of(const DataPacket& p, const DetectorConfig& cfg) {
  return p.complete_time ? *p.complete_time - p.queue_time : cfg.timeout_us + 1;
}

bool scan_candidate(const Verdict& v, const DetectorConfig& cfg) {
  return cfg.flying_scan && (v.kind == FailureKind::FWA || v.kind == FailureKind::InconsistentRecord);
}

std::vector<std::size_t> writes_checked(const std::vector<DataPacket>& packets, const BlockStore& image,
                                        const DetectorConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const auto& p = packets[i];
    if (p.op_kind != OpKind::Write) continue;
    if (response_of(p, cfg) <= cfg.timeout_us && p.address + p.size_bytes > image.capacity_bytes())
      throw OutputError("snapshot does not cover packet " + std::to_string(p.id));
    out.push_back(i);
  }
  return out;
}

Verdict first_pass(const DataPacket& p, const BlockStore& image, const DetectorConfig& cfg) {
  const bool waw = p.sequence_tag == SequenceTag::WAW;
  const auto response = response_of(p, cfg);
  if (response > cfg.timeout_us) return classify(p, {}, waw, response, cfg);
  std::vector<std::uint8_t> snap(p.size_bytes);
  image.read(p.address, snap);
  return classify(p, snap, waw, response, cfg);
}

}  // namespace

std::vector<VerdictRecord> classify_image(const std::vector<DataPacket>& packets, const BlockStore& image,
                                          const DetectorConfig& cfg) {
  const auto writes = writes_checked(packets, image, cfg);
  const auto n = static_cast<std::int64_t>(writes.size());
  std::vector<VerdictRecord> out(writes.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& p = packets[writes[k]];
    out[k] = {p.id, first_pass(p, image, cfg), response_of(p, cfg), p.origin};
  }

  std::vector<std::int64_t> candidates;
  for (std::int64_t k = 0; k < n; ++k)
    if (scan_candidate(out[k].verdict, cfg)) candidates.push_back(k);
  if (candidates.empty()) return out;

  const BlockChecksumIndex index(image);
  const auto m = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t c = 0; c < m; ++c) {
    auto& rec = out[candidates[c]];
    if (auto at = scan_flying(index, packets[writes[candidates[c]]]))
      rec.verdict = Verdict{FailureKind::FlyingWrite, 0, *at};
  }
  return out;
}

std::vector<VerdictRecord> classify_image_serial(const std::vector<DataPacket>& packets, const BlockStore& image,
                                                 const DetectorConfig& cfg) {
  std::vector<VerdictRecord> out;
  for (auto i : writes_checked(packets, image, cfg)) {
    const auto& p = packets[i];
    auto v = first_pass(p, image, cfg);
    if (scan_candidate(v, cfg))
      if (auto at = scan_flying_reference(image, p)) v = Verdict{FailureKind::FlyingWrite, 0, *at};
    out.push_back({p.id, v, response_of(p, cfg), p.origin});
  }
  return out;
}

}  // namespace ssdrel
