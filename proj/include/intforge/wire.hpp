#ifndef INTFORGE_WIRE_HPP
#define INTFORGE_WIRE_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intforge/result.hpp"

namespace intforge::wire {

// Instruction slots, named by bit position in the 8-bit instruction mask
// (bit 7 is the MSB). Every set bit selects one 32-bit metadata word per hop.
enum class MetadataSlot : uint8_t {
  kSwitchId = 7,
  kPortIds = 6,          // 16-bit ingress || 16-bit egress, one word
  kHopLatency = 5,       // nanoseconds
  kQueueOccupancy = 4,   // microseconds of drain time
  kIngressTimestamp = 3, // nanoseconds, truncated to 32 bits
  kEgressTimestamp = 2,  // nanoseconds, truncated to 32 bits
  kQueueCongestion = 1,  // 0/1
  kTxUtilization = 0,    // permille
};

inline constexpr std::size_t kSlotCount = 8;

const char* slot_name(MetadataSlot slot);
std::optional<MetadataSlot> slot_from_name(const std::string& name);

class InstructionBitmask {
 public:
  constexpr InstructionBitmask() = default;
  explicit constexpr InstructionBitmask(uint8_t bits) : bits_(bits) {}

  constexpr uint8_t bits() const { return bits_; }
  constexpr bool has(MetadataSlot slot) const {
    return (bits_ >> static_cast<uint8_t>(slot)) & 1u;
  }
  constexpr void set(MetadataSlot slot) {
    bits_ |= static_cast<uint8_t>(1u << static_cast<uint8_t>(slot));
  }
  constexpr int item_count() const { return std::popcount(bits_); }

  friend constexpr bool operator==(InstructionBitmask, InstructionBitmask) = default;

 private:
  uint8_t bits_ = 0;
};

// One hop's metadata values, indexed by slot bit position. A value is present
// iff the governing mask bit is set; present_mask() is what encode validates
// against the stack's instruction mask.
struct HopMetadata {
  std::array<std::optional<uint32_t>, kSlotCount> values;

  std::optional<uint32_t> get(MetadataSlot slot) const {
    return values[static_cast<uint8_t>(slot)];
  }
  void set(MetadataSlot slot, uint32_t v) {
    values[static_cast<uint8_t>(slot)] = v;
  }
  InstructionBitmask present_mask() const;

  friend bool operator==(const HopMetadata&, const HopMetadata&) = default;
};

// Builds a hop carrying exactly the slots named by `mask`, taking values from
// `full` (which must have every masked slot populated).
HopMetadata project_hop(const HopMetadata& full, InstructionBitmask mask);

// On-packet INT header: 4-byte shim, 4-byte metadata header, then hop_count
// groups of popcount(mask) 32-bit words. Hops are ordered most-recent first.
struct IntHeaderStack {
  uint8_t shim_type = 0x01;
  uint16_t shim_reserved = 0;  // carried, not validated
  InstructionBitmask mask;
  uint8_t max_hops = 8;
  uint8_t md_reserved = 0;     // carried, not validated
  std::vector<HopMetadata> hops;  // newest first

  uint8_t hop_count() const { return static_cast<uint8_t>(hops.size()); }
  // Stack payload size in 4-byte words (shim/md header not counted).
  uint8_t length_words() const {
    return static_cast<uint8_t>(hops.size() * mask.item_count());
  }

  friend bool operator==(const IntHeaderStack&, const IntHeaderStack&) = default;
};

struct FlowKey {
  uint32_t src_ip = 0;
  uint32_t dst_ip = 0;
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint8_t proto = 0;

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

inline constexpr std::size_t kFlowKeyWireSize = 13;

std::array<uint8_t, kFlowKeyWireSize> encode_flow_key(const FlowKey& key);
FlowKey decode_flow_key(std::span<const uint8_t, kFlowKeyWireSize> bytes);
std::string format_flow_key(const FlowKey& key);

// Sink-to-collector telemetry report. Fixed part is 14 bytes (version/hw_id/pad
// group, seq_no, sink_node_id, report_ts) followed by the 4-byte metadata
// header, the 13-byte flow key, 2 pad bytes and the hop stack, for a total of
// 33 + hop_count * popcount(mask) * 4 bytes.
struct TelemetryReport {
  uint8_t version = 1;   // 4 bits on the wire
  uint8_t hw_id = 0;     // 6 bits
  uint8_t pad6 = 0;      // 6 bits, carried as-is
  uint32_t seq_no = 0;
  uint32_t sink_node_id = 0;
  uint32_t report_ts = 0;  // microseconds at sink ingress
  FlowKey flow_key;
  InstructionBitmask mask;
  uint8_t max_hops = 8;
  uint8_t md_reserved = 0;
  std::vector<HopMetadata> hops;  // newest first

  uint8_t hop_count() const { return static_cast<uint8_t>(hops.size()); }

  friend bool operator==(const TelemetryReport&, const TelemetryReport&) = default;
};

inline constexpr std::size_t kReportFixedSize = 33;
inline constexpr std::size_t kStackHeaderSize = 8;  // shim + md header

constexpr std::size_t encoded_report_size(InstructionBitmask mask, std::size_t hop_count) {
  return kReportFixedSize + hop_count * static_cast<std::size_t>(mask.item_count()) * 4;
}
constexpr std::size_t encoded_stack_size(InstructionBitmask mask, std::size_t hop_count) {
  return kStackHeaderSize + hop_count * static_cast<std::size_t>(mask.item_count()) * 4;
}

struct WireError {
  enum class Kind {
    kTruncated,
    kBadVersion,
    kBadShimType,
    kLengthMismatch,
    kMaskMismatch,
    kStackOverflow,
  };
  Kind kind;
  std::string detail;
};

const char* wire_error_name(WireError::Kind kind);

template <typename T>
using WireResult = Result<T, WireError>;

WireResult<std::vector<uint8_t>> encode_report(const TelemetryReport& report);
WireResult<TelemetryReport> decode_report(std::span<const uint8_t> bytes);

WireResult<std::vector<uint8_t>> encode_header_stack(const IntHeaderStack& stack);
WireResult<IntHeaderStack> decode_header_stack(std::span<const uint8_t> bytes);

enum class PushStatus { kOk, kOverflow, kMaskMismatch };

// Prepends `hop` (most-recent first). On overflow the stack is left unchanged
// and the packet stays forwardable without the new hop.
PushStatus push_hop(IntHeaderStack& stack, const HopMetadata& hop);

}  // namespace intforge::wire

#endif  // INTFORGE_WIRE_HPP
