#include "intforge/detection.hpp"

#include <array>

namespace intforge::detection {

namespace {

constexpr std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> table{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

uint32_t crc32(std::span<const uint8_t> data) {
  uint32_t c = 0xFFFFFFFFu;
  for (uint8_t b : data) c = kCrcTable[(c ^ b) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

// Sum of the observed slot across hops, wrapping 32-bit adds. Hops without
// the slot contribute nothing.
uint32_t hop_sum(std::span<const HopMetadata> hops, MetadataSlot slot) {
  uint32_t sum = 0;
  for (const auto& hop : hops) {
    if (auto v = hop.get(slot)) sum += *v;
  }
  return sum;
}

bool hop_max(std::span<const HopMetadata> hops, MetadataSlot slot, uint32_t& out) {
  bool seen = false;
  uint32_t best = 0;
  for (const auto& hop : hops) {
    if (auto v = hop.get(slot)) {
      if (!seen || *v > best) best = *v;
      seen = true;
    }
  }
  out = best;
  return seen;
}

bool compare(uint32_t lhs, Comparator cmp, uint32_t rhs) {
  switch (cmp) {
    case Comparator::kLt: return lhs < rhs;
    case Comparator::kGt: return lhs > rhs;
    case Comparator::kLe: return lhs <= rhs;
    case Comparator::kGe: return lhs >= rhs;
    case Comparator::kEq: return lhs == rhs;
    case Comparator::kNe: return lhs != rhs;
  }
  return false;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

}  // namespace

const char* algorithm_name(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kPerHop: return "per_hop";
    case AlgorithmKind::kPerFlow: return "per_flow";
    case AlgorithmKind::kMovingAverage: return "moving_average";
    case AlgorithmKind::kNoop: return "noop";
    case AlgorithmKind::kComplex: return "complex";
  }
  return "unknown";
}

uint32_t flow_hash(const FlowKey& key) {
  auto bytes = wire::encode_flow_key(key);
  return crc32(bytes);
}

DetectorState::DetectorState(const DetectorSizes& sizes)
    : per_hop_(sizes.per_hop_regs, 0),
      per_flow_(sizes.flow_regs, 0),
      avg_(sizes.flow_regs, 0),
      exprs_(sizes.expr_regs),
      expr_present_(sizes.expr_regs, false) {}

void DetectorState::install_expression(std::size_t index, CnfExpression expr) {
  if (index >= exprs_.size()) {
    exprs_.resize(index + 1);
    expr_present_.resize(index + 1, false);
  }
  exprs_[index] = std::move(expr);
  expr_present_[index] = true;
}

const CnfExpression* DetectorState::expression(std::size_t index) const {
  if (index >= exprs_.size() || !expr_present_[index]) return nullptr;
  return &exprs_[index];
}

Verdict detect_per_hop(DetectorState& state, std::span<const HopMetadata> hops,
                       const AlgorithmConfig& cfg) {
  Verdict verdict;
  for (const auto& hop : hops) {
    auto value = hop.get(cfg.metadata_type);
    if (!value) continue;  // hop does not carry the observed item
    // Registers are keyed by switch id; hops without one fall back to the
    // stack position so they still land on a stable register.
    uint32_t key = hop.get(MetadataSlot::kSwitchId)
                       .value_or(static_cast<uint32_t>(&hop - hops.data()));
    std::size_t idx = state.per_hop_index(key);
    uint32_t prev = state.per_hop_[idx];
    if (abs_diff(*value, prev) > cfg.threshold) {
      state.per_hop_[idx] = *value;
      if (!verdict.event) verdict.observed_value = *value;
      verdict.event = true;
    }
  }
  return verdict;
}

Verdict detect_per_flow(DetectorState& state, const FlowKey& flow,
                        std::span<const HopMetadata> hops, const AlgorithmConfig& cfg) {
  uint32_t sum = hop_sum(hops, cfg.metadata_type);
  std::size_t idx = state.flow_index(flow);
  uint32_t prev = state.per_flow_[idx];
  if (abs_diff(sum, prev) > cfg.threshold) {
    state.per_flow_[idx] = sum;
    return Verdict{true, sum};
  }
  return Verdict{false, sum};
}

Verdict detect_moving_average(DetectorState& state, const FlowKey& flow,
                              std::span<const HopMetadata> hops, const AlgorithmConfig& cfg) {
  uint32_t sum = hop_sum(hops, cfg.metadata_type);
  std::size_t idx = state.flow_index(flow);
  uint32_t avg = state.avg_[idx];
  // Fixed-point n/256 blend with truncating division; no floating point.
  uint64_t blended = (static_cast<uint64_t>(cfg.alpha_num) * sum +
                      static_cast<uint64_t>(256 - cfg.alpha_num) * avg) /
                     256;
  uint32_t next = static_cast<uint32_t>(blended);
  bool event = abs_diff(next, avg) > cfg.threshold;
  if (event || cfg.ewma_always_update) state.avg_[idx] = next;
  return Verdict{event, next};
}

Verdict detect_noop() { return Verdict{true, 0}; }

Verdict eval_cnf(const CnfExpression& expr, std::span<const HopMetadata> hops) {
  for (const auto& clause : expr.clauses) {
    bool clause_true = false;
    for (const auto& lit : clause) {
      uint32_t value = 0;
      bool present = false;
      if (lit.aggregate == Aggregate::kMaxOverHops) {
        present = hop_max(hops, lit.metadata_type, value);
      } else {
        for (const auto& hop : hops) present = present || hop.get(lit.metadata_type).has_value();
        value = hop_sum(hops, lit.metadata_type);
      }
      // A literal over an item absent from the mask is false.
      if (present && compare(value, lit.cmp, lit.constant)) {
        clause_true = true;
        break;
      }
    }
    if (!clause_true) return Verdict{false, 0};
  }
  return Verdict{true, 1};
}

Verdict evaluate(DetectorState& state, const FlowKey& flow, std::span<const HopMetadata> hops,
                 const AlgorithmConfig& cfg) {
  switch (cfg.kind) {
    case AlgorithmKind::kPerHop:
      return detect_per_hop(state, hops, cfg);
    case AlgorithmKind::kPerFlow:
      return detect_per_flow(state, flow, hops, cfg);
    case AlgorithmKind::kMovingAverage:
      return detect_moving_average(state, flow, hops, cfg);
    case AlgorithmKind::kNoop:
      return detect_noop();
    case AlgorithmKind::kComplex: {
      const CnfExpression* expr = state.expression(cfg.expr_index);
      if (!expr) {
        ++state.anomalies_;
        return Verdict{false, 0};
      }
      return eval_cnf(*expr, hops);
    }
  }
  ++state.anomalies_;
  return Verdict{false, 0};
}

std::vector<uint8_t> encode_cnf(const CnfExpression& expr) {
  std::vector<uint8_t> out;
  for (std::size_t c = 0; c < expr.clauses.size(); ++c) {
    for (const auto& lit : expr.clauses[c]) {
      out.push_back(static_cast<uint8_t>(lit.metadata_type));
      out.push_back(static_cast<uint8_t>(lit.cmp));
      out.push_back(static_cast<uint8_t>(lit.aggregate));
      out.push_back(0);
      put_u32(out, lit.constant);
      put_u32(out, static_cast<uint32_t>(c));
    }
  }
  return out;
}

Result<CnfExpression, CnfDecodeError> decode_cnf(std::span<const uint8_t> bytes) {
  if (bytes.size() % 12 != 0) {
    return CnfDecodeError{"expression register size " + std::to_string(bytes.size()) +
                          " is not a multiple of 12"};
  }
  CnfExpression expr;
  for (std::size_t off = 0; off < bytes.size(); off += 12) {
    const uint8_t* p = bytes.data() + off;
    CnfLiteral lit;
    if (p[0] >= wire::kSlotCount) return CnfDecodeError{"bad metadata_type " + std::to_string(p[0])};
    if (p[1] > static_cast<uint8_t>(Comparator::kNe))
      return CnfDecodeError{"bad comparator " + std::to_string(p[1])};
    if (p[2] > static_cast<uint8_t>(Aggregate::kMaxOverHops))
      return CnfDecodeError{"bad aggregate " + std::to_string(p[2])};
    lit.metadata_type = static_cast<MetadataSlot>(p[0]);
    lit.cmp = static_cast<Comparator>(p[1]);
    lit.aggregate = static_cast<Aggregate>(p[2]);
    lit.constant = read_u32(p + 4);
    uint32_t clause = read_u32(p + 8);
    if (clause >= kMaxClauses) return CnfDecodeError{"clause index " + std::to_string(clause)};
    if (expr.clauses.size() <= clause) expr.clauses.resize(clause + 1);
    if (expr.clauses[clause].size() >= kMaxLiterals)
      return CnfDecodeError{"clause " + std::to_string(clause) + " exceeds literal bound"};
    expr.clauses[clause].push_back(lit);
  }
  for (std::size_t c = 0; c < expr.clauses.size(); ++c) {
    if (expr.clauses[c].empty())
      return CnfDecodeError{"clause " + std::to_string(c) + " has no literals"};
  }
  return expr;
}

}  // namespace intforge::detection
