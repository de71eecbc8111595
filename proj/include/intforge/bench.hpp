#ifndef INTFORGE_BENCH_HPP
#define INTFORGE_BENCH_HPP

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "intforge/collector.hpp"
#include "intforge/dataplane.hpp"
#include "intforge/detection.hpp"
#include "intforge/traffic.hpp"

namespace intforge::bench {

struct SweepSpec {
  std::vector<std::string> presets{"web", "cache", "hadoop"};
  std::vector<detection::AlgorithmKind> algorithms{detection::AlgorithmKind::kPerFlow};
  std::vector<uint32_t> thresholds_us{0, 25, 50, 75, 100, 125, 150, 175, 200};
  std::size_t packets = 200000;
  std::size_t loops = 1;
  // When positive, overrides `loops`: each cell replays its trace for this
  // long in trace time, whole loops only. Ratios are loop-invariant.
  double duration_s = 0.0;
  uint64_t seed = 1;
  // Reports/s one collector core sustains on the sweep's report shape; used
  // for the capacity projection. Override from a measured value or a known
  // deployment figure.
  double base_capacity = 1.0e6;
  uint32_t alpha_num = 64;  // moving-average weight when that algorithm is swept
  detection::MetadataSlot metadata_type = detection::MetadataSlot::kQueueOccupancy;
  // Cells are shared-nothing; >1 runs them on that many threads. Results are
  // identical either way.
  unsigned parallel = 1;
};

struct SweepRow {
  std::string preset;
  detection::AlgorithmKind algorithm = detection::AlgorithmKind::kPerFlow;
  uint32_t threshold_us = 0;
  uint64_t packets = 0;
  uint64_t events = 0;
  double pass_ratio = 0.0;
  std::optional<double> potential_capacity;  // empty when no events were detected
};

struct SweepOutcome {
  std::vector<SweepRow> rows;
  uint64_t reports_emitted = 0;
  uint64_t collector_forwarded = 0;
  uint64_t collector_parse_errors = 0;
  uint64_t carrier_mismatches = 0;  // restored packets that differ from source input
};

SweepOutcome run_sweep(const SweepSpec& spec);

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct CapacityCell {
  std::size_t items = 1;
  std::size_t hops = 1;
  double reports_per_s = 0.0;
};

// Parse-capacity grid over item count x hop count.
std::vector<CapacityCell> run_capacity_bench(const std::vector<std::size_t>& item_counts,
                                             const std::vector<std::size_t>& hop_counts,
                                             double duration_s);
void write_capacity_csv(const std::vector<CapacityCell>& cells, std::ostream& out);

struct CompareRow {
  uint32_t threshold_us = 0;
  uint64_t per_flow_events = 0;
  uint64_t moving_average_events = 0;
};

struct CompareOutcome {
  std::vector<CompareRow> rows;
  // Fraction of thresholds where the moving average emitted no more events
  // than per-flow. Reported, not asserted.
  double ma_not_above_fraction = 0.0;
};

CompareOutcome compare_algorithms(const std::string& preset_name,
                                  const std::vector<uint32_t>& thresholds, uint32_t alpha_num,
                                  std::size_t packets, uint64_t seed);
void write_compare_csv(const CompareOutcome& outcome, std::ostream& out);

// Mask with the top `n` instruction bits set (switch_id first).
wire::InstructionBitmask mask_with_items(std::size_t n);

// Per-packet event flags from running one detection algorithm over a trace.
std::vector<bool> event_sequence(const std::vector<traffic::TraceRecord>& records,
                                 const detection::AlgorithmConfig& cfg, std::size_t loops = 1);

// Builds the INT-carrying packet a record represents: carrier bytes derived
// deterministically from the record, hop stack copied from the trace.
dataplane::Packet packet_from_record(const traffic::TraceRecord& record, uint64_t ts_ns);

}  // namespace intforge::bench

#endif  // INTFORGE_BENCH_HPP
