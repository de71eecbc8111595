#ifndef INTFORGE_DETECTION_HPP
#define INTFORGE_DETECTION_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "intforge/result.hpp"
#include "intforge/wire.hpp"

namespace intforge::detection {

using wire::FlowKey;
using wire::HopMetadata;
using wire::InstructionBitmask;
using wire::MetadataSlot;

enum class AlgorithmKind : uint8_t {
  kPerHop = 0,
  kPerFlow = 1,
  kMovingAverage = 2,
  kNoop = 3,
  kComplex = 4,
};

const char* algorithm_name(AlgorithmKind kind);

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::kNoop;
  MetadataSlot metadata_type = MetadataSlot::kQueueOccupancy;
  uint32_t threshold = 0;
  // EWMA weight of the new value, fixed-point numerator over 256.
  uint32_t alpha_num = 256;
  // Complex only: expression register index.
  uint32_t expr_index = 0;
  // Off by default: the stored average is written only on an event.
  bool ewma_always_update = false;

  friend bool operator==(const AlgorithmConfig&, const AlgorithmConfig&) = default;
};

enum class Comparator : uint8_t { kLt = 0, kGt = 1, kLe = 2, kGe = 3, kEq = 4, kNe = 5 };
enum class Aggregate : uint8_t { kSumOverHops = 0, kMaxOverHops = 1 };

struct CnfLiteral {
  MetadataSlot metadata_type = MetadataSlot::kQueueOccupancy;
  Comparator cmp = Comparator::kGt;
  Aggregate aggregate = Aggregate::kSumOverHops;
  uint32_t constant = 0;

  friend bool operator==(const CnfLiteral&, const CnfLiteral&) = default;
};

// AND over clauses of (OR over literals). The empty expression is true.
struct CnfExpression {
  std::vector<std::vector<CnfLiteral>> clauses;

  friend bool operator==(const CnfExpression&, const CnfExpression&) = default;
};

inline constexpr std::size_t kMaxClauses = 4;
inline constexpr std::size_t kMaxLiterals = 4;

// Register encoding, 12 bytes per literal:
//   metadata_type:8  comparator:8  aggregate:8  pad:8  constant:32be  clause_index:32be
std::vector<uint8_t> encode_cnf(const CnfExpression& expr);

struct CnfDecodeError {
  std::string detail;
};
Result<CnfExpression, CnfDecodeError> decode_cnf(std::span<const uint8_t> bytes);

struct Verdict {
  bool event = false;
  uint32_t observed_value = 0;
};

struct DetectorSizes {
  std::size_t per_hop_regs = 256;   // keyed by switch_id mod size
  std::size_t flow_regs = 65536;    // keyed by crc32(flow key) mod size
  std::size_t expr_regs = 16;
};

// CRC-32 (reflected, poly 0xEDB88320) over the 13-byte wire encoding.
uint32_t flow_hash(const FlowKey& key);

// Register-table emulation. Zero-initialized; registers are written only when
// the corresponding verdict marks an event (except the opt-in EWMA
// always-update mode).
class DetectorState {
 public:
  DetectorState() : DetectorState(DetectorSizes{}) {}
  explicit DetectorState(const DetectorSizes& sizes);

  std::size_t per_hop_index(uint32_t switch_id) const { return switch_id % per_hop_.size(); }
  std::size_t flow_index(const FlowKey& key) const { return flow_hash(key) % per_flow_.size(); }

  uint32_t per_hop_reg(std::size_t i) const { return per_hop_[i]; }
  uint32_t per_flow_reg(std::size_t i) const { return per_flow_[i]; }
  uint32_t avg_reg(std::size_t i) const { return avg_[i]; }

  std::span<const uint32_t> per_hop_regs() const { return per_hop_; }
  std::span<const uint32_t> per_flow_regs() const { return per_flow_; }
  std::span<const uint32_t> avg_regs() const { return avg_; }

  void install_expression(std::size_t index, CnfExpression expr);
  const CnfExpression* expression(std::size_t index) const;

  uint64_t anomalies() const { return anomalies_; }

 private:
  friend Verdict detect_per_hop(DetectorState&, std::span<const HopMetadata>,
                                const AlgorithmConfig&);
  friend Verdict detect_per_flow(DetectorState&, const FlowKey&, std::span<const HopMetadata>,
                                 const AlgorithmConfig&);
  friend Verdict detect_moving_average(DetectorState&, const FlowKey&,
                                       std::span<const HopMetadata>, const AlgorithmConfig&);
  friend Verdict evaluate(DetectorState&, const FlowKey&, std::span<const HopMetadata>,
                          const AlgorithmConfig&);

  std::vector<uint32_t> per_hop_;
  std::vector<uint32_t> per_flow_;
  std::vector<uint32_t> avg_;
  std::vector<CnfExpression> exprs_;
  std::vector<bool> expr_present_;
  uint64_t anomalies_ = 0;
};

// |a - b| via conditional subtraction, no signed arithmetic.
constexpr uint32_t abs_diff(uint32_t a, uint32_t b) { return a > b ? a - b : b - a; }

Verdict detect_per_hop(DetectorState& state, std::span<const HopMetadata> hops,
                       const AlgorithmConfig& cfg);
Verdict detect_per_flow(DetectorState& state, const FlowKey& flow, std::span<const HopMetadata> hops,
                        const AlgorithmConfig& cfg);
Verdict detect_moving_average(DetectorState& state, const FlowKey& flow,
                              std::span<const HopMetadata> hops, const AlgorithmConfig& cfg);
Verdict detect_noop();
Verdict eval_cnf(const CnfExpression& expr, std::span<const HopMetadata> hops);

// Algorithm-table dispatch. Unknown kinds count an anomaly and report no event.
Verdict evaluate(DetectorState& state, const FlowKey& flow, std::span<const HopMetadata> hops,
                 const AlgorithmConfig& cfg);

}  // namespace intforge::detection

#endif  // INTFORGE_DETECTION_HPP
