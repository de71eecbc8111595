#include "intforge/wire.hpp"

#include <cstring>
#include <sstream>

namespace intforge::wire {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

uint32_t read_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

// Hop groups are laid out mask-ordered, MSB slot first.
void encode_hop(std::vector<uint8_t>& out, const HopMetadata& hop, InstructionBitmask mask) {
  for (int bit = 7; bit >= 0; --bit) {
    auto slot = static_cast<MetadataSlot>(bit);
    if (mask.has(slot)) put_u32(out, *hop.get(slot));
  }
}

HopMetadata decode_hop(const uint8_t*& p, InstructionBitmask mask) {
  HopMetadata hop;
  for (int bit = 7; bit >= 0; --bit) {
    auto slot = static_cast<MetadataSlot>(bit);
    if (mask.has(slot)) {
      hop.set(slot, read_u32(p));
      p += 4;
    }
  }
  return hop;
}

std::optional<WireError> check_stack(InstructionBitmask mask, uint8_t max_hops,
                                     const std::vector<HopMetadata>& hops) {
  if (hops.size() > max_hops) {
    return WireError{WireError::Kind::kStackOverflow,
                     "hop_count " + std::to_string(hops.size()) + " exceeds max_hops " +
                         std::to_string(max_hops)};
  }
  for (std::size_t i = 0; i < hops.size(); ++i) {
    if (hops[i].present_mask() != mask) {
      return WireError{WireError::Kind::kMaskMismatch,
                       "hop " + std::to_string(i) + " values do not match instruction mask"};
    }
  }
  return std::nullopt;
}

}  // namespace

const char* slot_name(MetadataSlot slot) {
  switch (slot) {
    case MetadataSlot::kSwitchId: return "switch_id";
    case MetadataSlot::kPortIds: return "port_ids";
    case MetadataSlot::kHopLatency: return "hop_latency";
    case MetadataSlot::kQueueOccupancy: return "queue_occupancy";
    case MetadataSlot::kIngressTimestamp: return "ingress_timestamp";
    case MetadataSlot::kEgressTimestamp: return "egress_timestamp";
    case MetadataSlot::kQueueCongestion: return "queue_congestion_status";
    case MetadataSlot::kTxUtilization: return "egress_port_tx_utilization";
  }
  return "unknown";
}

std::optional<MetadataSlot> slot_from_name(const std::string& name) {
  for (int bit = 0; bit < 8; ++bit) {
    auto slot = static_cast<MetadataSlot>(bit);
    if (name == slot_name(slot)) return slot;
  }
  return std::nullopt;
}

InstructionBitmask HopMetadata::present_mask() const {
  uint8_t bits = 0;
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    if (values[i].has_value()) bits |= static_cast<uint8_t>(1u << i);
  }
  return InstructionBitmask(bits);
}

HopMetadata project_hop(const HopMetadata& full, InstructionBitmask mask) {
  HopMetadata out;
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    auto slot = static_cast<MetadataSlot>(i);
    if (mask.has(slot)) out.values[i] = full.values[i].value_or(0);
  }
  return out;
}

std::array<uint8_t, kFlowKeyWireSize> encode_flow_key(const FlowKey& key) {
  std::array<uint8_t, kFlowKeyWireSize> out{};
  out[0] = static_cast<uint8_t>(key.src_ip >> 24);
  out[1] = static_cast<uint8_t>(key.src_ip >> 16);
  out[2] = static_cast<uint8_t>(key.src_ip >> 8);
  out[3] = static_cast<uint8_t>(key.src_ip);
  out[4] = static_cast<uint8_t>(key.dst_ip >> 24);
  out[5] = static_cast<uint8_t>(key.dst_ip >> 16);
  out[6] = static_cast<uint8_t>(key.dst_ip >> 8);
  out[7] = static_cast<uint8_t>(key.dst_ip);
  out[8] = static_cast<uint8_t>(key.src_port >> 8);
  out[9] = static_cast<uint8_t>(key.src_port);
  out[10] = static_cast<uint8_t>(key.dst_port >> 8);
  out[11] = static_cast<uint8_t>(key.dst_port);
  out[12] = key.proto;
  return out;
}

FlowKey decode_flow_key(std::span<const uint8_t, kFlowKeyWireSize> bytes) {
  FlowKey key;
  key.src_ip = read_u32(bytes.data());
  key.dst_ip = read_u32(bytes.data() + 4);
  key.src_port = read_u16(bytes.data() + 8);
  key.dst_port = read_u16(bytes.data() + 10);
  key.proto = bytes[12];
  return key;
}

std::string format_flow_key(const FlowKey& key) {
  auto ip = [](uint32_t v) {
    std::ostringstream os;
    os << ((v >> 24) & 0xff) << '.' << ((v >> 16) & 0xff) << '.' << ((v >> 8) & 0xff) << '.'
       << (v & 0xff);
    return os.str();
  };
  std::ostringstream os;
  os << ip(key.src_ip) << ':' << key.src_port << "->" << ip(key.dst_ip) << ':' << key.dst_port
     << '/' << static_cast<int>(key.proto);
  return os.str();
}

const char* wire_error_name(WireError::Kind kind) {
  switch (kind) {
    case WireError::Kind::kTruncated: return "truncated";
    case WireError::Kind::kBadVersion: return "bad_version";
    case WireError::Kind::kBadShimType: return "bad_shim_type";
    case WireError::Kind::kLengthMismatch: return "length_mismatch";
    case WireError::Kind::kMaskMismatch: return "mask_mismatch";
    case WireError::Kind::kStackOverflow: return "stack_overflow";
  }
  return "unknown";
}

WireResult<std::vector<uint8_t>> encode_report(const TelemetryReport& report) {
  if (auto err = check_stack(report.mask, report.max_hops, report.hops)) return *err;

  std::vector<uint8_t> out;
  out.reserve(encoded_report_size(report.mask, report.hops.size()));
  uint16_t head = static_cast<uint16_t>(((report.version & 0x0f) << 12) |
                                        ((report.hw_id & 0x3f) << 6) | (report.pad6 & 0x3f));
  put_u16(out, head);
  put_u32(out, report.seq_no);
  put_u32(out, report.sink_node_id);
  put_u32(out, report.report_ts);
  out.push_back(report.mask.bits());
  out.push_back(report.hop_count());
  out.push_back(report.max_hops);
  out.push_back(report.md_reserved);
  auto key = encode_flow_key(report.flow_key);
  out.insert(out.end(), key.begin(), key.end());
  put_u16(out, 0);  // alignment pad
  for (const auto& hop : report.hops) encode_hop(out, hop, report.mask);
  return out;
}

WireResult<TelemetryReport> decode_report(std::span<const uint8_t> bytes) {
  if (bytes.size() < kReportFixedSize) {
    return WireError{WireError::Kind::kTruncated,
                     "need at least " + std::to_string(kReportFixedSize) + " bytes, got " +
                         std::to_string(bytes.size())};
  }
  const uint8_t* p = bytes.data();
  TelemetryReport report;
  uint16_t head = read_u16(p);
  report.version = static_cast<uint8_t>(head >> 12);
  report.hw_id = static_cast<uint8_t>((head >> 6) & 0x3f);
  report.pad6 = static_cast<uint8_t>(head & 0x3f);
  if (report.version != 1) {
    return WireError{WireError::Kind::kBadVersion,
                     "version " + std::to_string(report.version)};
  }
  report.seq_no = read_u32(p + 2);
  report.sink_node_id = read_u32(p + 6);
  report.report_ts = read_u32(p + 10);
  report.mask = InstructionBitmask(p[14]);
  uint8_t hop_count = p[15];
  report.max_hops = p[16];
  report.md_reserved = p[17];
  report.flow_key = decode_flow_key(std::span<const uint8_t, kFlowKeyWireSize>(p + 18, kFlowKeyWireSize));

  std::size_t expected = encoded_report_size(report.mask, hop_count);
  if (bytes.size() != expected) {
    return WireError{WireError::Kind::kLengthMismatch,
                     "declared stack needs " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size())};
  }
  const uint8_t* sp = p + kReportFixedSize;
  report.hops.reserve(hop_count);
  for (uint8_t i = 0; i < hop_count; ++i) report.hops.push_back(decode_hop(sp, report.mask));
  return report;
}

WireResult<std::vector<uint8_t>> encode_header_stack(const IntHeaderStack& stack) {
  if (auto err = check_stack(stack.mask, stack.max_hops, stack.hops)) return *err;

  std::vector<uint8_t> out;
  out.reserve(encoded_stack_size(stack.mask, stack.hops.size()));
  out.push_back(stack.shim_type);
  out.push_back(stack.length_words());
  put_u16(out, stack.shim_reserved);
  out.push_back(stack.mask.bits());
  out.push_back(stack.hop_count());
  out.push_back(stack.max_hops);
  out.push_back(stack.md_reserved);
  for (const auto& hop : stack.hops) encode_hop(out, hop, stack.mask);
  return out;
}

WireResult<IntHeaderStack> decode_header_stack(std::span<const uint8_t> bytes) {
  if (bytes.size() < kStackHeaderSize) {
    return WireError{WireError::Kind::kTruncated,
                     "need at least " + std::to_string(kStackHeaderSize) + " bytes, got " +
                         std::to_string(bytes.size())};
  }
  const uint8_t* p = bytes.data();
  IntHeaderStack stack;
  stack.shim_type = p[0];
  if (stack.shim_type != 0x01) {
    return WireError{WireError::Kind::kBadShimType,
                     "shim type " + std::to_string(stack.shim_type)};
  }
  uint8_t length_words = p[1];
  stack.shim_reserved = read_u16(p + 2);
  stack.mask = InstructionBitmask(p[4]);
  uint8_t hop_count = p[5];
  stack.max_hops = p[6];
  stack.md_reserved = p[7];

  std::size_t expected_words = hop_count * static_cast<std::size_t>(stack.mask.item_count());
  if (length_words != expected_words) {
    return WireError{WireError::Kind::kLengthMismatch,
                     "length_words " + std::to_string(length_words) + " but hop_count*items = " +
                         std::to_string(expected_words)};
  }
  if (bytes.size() != kStackHeaderSize + expected_words * 4) {
    return WireError{WireError::Kind::kLengthMismatch,
                     "buffer is " + std::to_string(bytes.size()) + " bytes, stack declares " +
                         std::to_string(kStackHeaderSize + expected_words * 4)};
  }
  const uint8_t* sp = p + kStackHeaderSize;
  stack.hops.reserve(hop_count);
  for (uint8_t i = 0; i < hop_count; ++i) stack.hops.push_back(decode_hop(sp, stack.mask));
  return stack;
}

PushStatus push_hop(IntHeaderStack& stack, const HopMetadata& hop) {
  if (stack.hops.size() >= stack.max_hops) return PushStatus::kOverflow;
  if (hop.present_mask() != stack.mask) return PushStatus::kMaskMismatch;
  stack.hops.insert(stack.hops.begin(), hop);
  return PushStatus::kOk;
}

}  // namespace intforge::wire
