#include <nlohmann/json.hpp>

#include "ssdrel/packet.hpp"

namespace ssdrel {
namespace {

using nlohmann::ordered_json;

std::string hex_bytes(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.resize(bytes.size() * 2);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    s[2 * i] = kDigits[bytes[i] >> 4];
    s[2 * i + 1] = kDigits[bytes[i] & 0xf];
  }
  return s;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

// Field-level failures carry the line length as offset: the JSON itself parsed.
[[noreturn]] void field_error(const std::string& what, std::string_view line) {
  throw ParseError("bad packet record: " + what, line.size());
}

Checksum64 get_sum(const ordered_json& j, const char* key, std::string_view line) {
  if (!j.contains(key) || !j[key].is_string()) field_error(std::string("missing ") + key, line);
  Checksum64 c;
  if (!from_hex(j[key].get_ref<const std::string&>(), c)) field_error(std::string("bad ") + key, line);
  return c;
}

std::optional<Checksum64> get_opt_sum(const ordered_json& j, const char* key, std::string_view line) {
  if (!j.contains(key)) field_error(std::string("missing ") + key, line);
  if (j[key].is_null()) return std::nullopt;
  return get_sum(j, key, line);
}

template <typename T>
T get_uint(const ordered_json& j, const char* key, std::string_view line) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) field_error(std::string("missing ") + key, line);
  return j[key].get<T>();
}

std::string get_str(const ordered_json& j, const char* key, std::string_view line) {
  if (!j.contains(key) || !j[key].is_string()) field_error(std::string("missing ") + key, line);
  return j[key].get<std::string>();
}

}  // namespace

std::string encode_record(const DataPacket& p) {
  ordered_json j;
  j["Id"] = p.id;
  j["Op"] = to_string(p.op_kind);
  j["Tag"] = to_string(p.sequence_tag);
  j["Origin"] = to_string(p.origin);
  j["Issuer"] = p.issuer_id;
  j["Size"] = p.size_bytes;
  j["Address"] = p.address;
  j["Queue_Time"] = p.queue_time;
  j["Complete_Time"] = p.complete_time ? ordered_json(*p.complete_time) : ordered_json(nullptr);
  j["Initial_Checksum"] = to_hex(p.initial_checksum);
  j["Data_Checksum"] = to_hex(p.data_checksum);
  j["Final_Checksum"] = p.final_checksum ? ordered_json(to_hex(*p.final_checksum)) : ordered_json(nullptr);
  auto subs = ordered_json::array();
  for (const auto& s : p.sub_requests) {
    ordered_json sj;
    sj["ID"] = s.id;
    sj["Sub_Req_Size"] = s.size_bytes;
    sj["Sub_Address"] = s.address;
    sj["Sub_Checksum"] = to_hex(s.data_checksum);
    sj["Sub_Final_Checksum"] =
        s.final_checksum ? ordered_json(to_hex(*s.final_checksum)) : ordered_json(nullptr);
    sj["Sub_Data"] = hex_bytes(s.payload);
    subs.push_back(std::move(sj));
  }
  j["Sub_Requests"] = std::move(subs);
  return j.dump();
}

DataPacket decode_record(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line.begin(), line.end());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError("malformed packet record", e.byte);
  }
  if (!j.is_object()) field_error("not an object", line);

  DataPacket p;
  p.id = get_uint<std::uint64_t>(j, "Id", line);
  if (!parse_op_kind(get_str(j, "Op", line), p.op_kind)) field_error("bad Op", line);
  if (!parse_sequence_tag(get_str(j, "Tag", line), p.sequence_tag)) field_error("bad Tag", line);
  if (!parse_origin(get_str(j, "Origin", line), p.origin)) field_error("bad Origin", line);
  p.issuer_id = get_uint<std::uint32_t>(j, "Issuer", line);
  p.size_bytes = get_uint<std::uint64_t>(j, "Size", line);
  p.address = get_uint<std::uint64_t>(j, "Address", line);
  if (!j.contains("Queue_Time") || !j["Queue_Time"].is_number_integer()) field_error("missing Queue_Time", line);
  p.queue_time = j["Queue_Time"].get<SimTime>();
  if (!j.contains("Complete_Time")) field_error("missing Complete_Time", line);
  if (!j["Complete_Time"].is_null()) {
    if (!j["Complete_Time"].is_number_integer()) field_error("bad Complete_Time", line);
    p.complete_time = j["Complete_Time"].get<SimTime>();
  }
  p.initial_checksum = get_sum(j, "Initial_Checksum", line);
  p.data_checksum = get_sum(j, "Data_Checksum", line);
  p.final_checksum = get_opt_sum(j, "Final_Checksum", line);

  if (!j.contains("Sub_Requests") || !j["Sub_Requests"].is_array()) field_error("missing Sub_Requests", line);
  for (const auto& sj : j["Sub_Requests"]) {
    SubRequest s;
    s.id = get_uint<std::uint32_t>(sj, "ID", line);
    s.size_bytes = get_uint<std::uint32_t>(sj, "Sub_Req_Size", line);
    s.address = get_uint<std::uint64_t>(sj, "Sub_Address", line);
    s.data_checksum = get_sum(sj, "Sub_Checksum", line);
    s.final_checksum = get_opt_sum(sj, "Sub_Final_Checksum", line);
    const auto hex = get_str(sj, "Sub_Data", line);
    if (hex.size() % 2) field_error("odd Sub_Data length", line);
    s.payload.resize(hex.size() / 2);
    for (std::size_t i = 0; i < s.payload.size(); ++i) {
      int hi = hex_digit(hex[2 * i]), lo = hex_digit(hex[2 * i + 1]);
      if (hi < 0 || lo < 0) field_error("bad Sub_Data", line);
      s.payload[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    p.sub_requests.push_back(std::move(s));
  }

  std::uint64_t expect = p.address, total = 0;
  for (std::size_t i = 0; i < p.sub_requests.size(); ++i) {
    const auto& s = p.sub_requests[i];
    if (s.id != i || s.address != expect) field_error("sub-requests do not partition the range", line);
    if (!s.payload.empty() && s.payload.size() != s.size_bytes) field_error("Sub_Data length mismatch", line);
    expect += s.size_bytes;
    total += s.size_bytes;
  }
  if (total != p.size_bytes) field_error("sub-request sizes do not sum to Size", line);
  return p;
}

}  // namespace ssdrel
