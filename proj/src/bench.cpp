#include "intforge/bench.hpp"

#include <atomic>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "intforge/controlplane.hpp"

namespace intforge::bench {

using controlplane::Controller;
using controlplane::FlowConfig;
using controlplane::SwitchRole;
using dataplane::LocalTelemetry;
using dataplane::Packet;
using dataplane::SwitchPipeline;
using detection::AlgorithmConfig;
using detection::AlgorithmKind;

wire::InstructionBitmask mask_with_items(std::size_t n) {
  wire::InstructionBitmask mask;
  for (std::size_t i = 0; i < n && i < wire::kSlotCount; ++i) {
    mask.set(static_cast<wire::MetadataSlot>(7 - i));
  }
  return mask;
}

Packet packet_from_record(const traffic::TraceRecord& record, uint64_t ts_ns) {
  Packet pkt;
  pkt.flow_key = record.flow_key;
  pkt.arrival_ts = ts_ns;

  // Carrier bytes are a pure function of the record so restoration can be
  // checked byte-exact after the sink strips telemetry.
  pkt.original_bytes.resize(16);
  uint64_t stamp = record.ts * 0x9E3779B97F4A7C15ull + record.flow_key.src_ip;
  for (int i = 0; i < 8; ++i) pkt.original_bytes[i] = static_cast<uint8_t>(stamp >> (8 * i));
  uint32_t tail = record.flow_key.dst_ip ^ static_cast<uint32_t>(record.ts);
  for (int i = 0; i < 4; ++i) pkt.original_bytes[8 + i] = static_cast<uint8_t>(tail >> (8 * i));
  pkt.payload_len = static_cast<uint32_t>(pkt.original_bytes.size());

  if (!record.hops.empty()) {
    wire::IntHeaderStack stack;
    stack.mask = record.hops.front().present_mask();
    stack.max_hops = 8;
    for (const auto& hop : record.hops) {
      stack.hops.push_back(wire::project_hop(hop, stack.mask));
    }
    pkt.int_stack = std::move(stack);
  }
  return pkt;
}

std::vector<bool> event_sequence(const std::vector<traffic::TraceRecord>& records,
                                 const AlgorithmConfig& cfg, std::size_t loops) {
  detection::DetectorState state;
  std::vector<bool> events;
  events.reserve(records.size() * loops);
  for (std::size_t loop = 0; loop < loops; ++loop) {
    for (const auto& record : records) {
      auto verdict = detection::evaluate(state, record.flow_key, record.hops, cfg);
      events.push_back(verdict.event);
    }
  }
  return events;
}

namespace {

constexpr uint32_t kSinkSwitchId = 100;

struct CellResult {
  uint64_t packets = 0;
  uint64_t events = 0;
  uint64_t forwarded = 0;
  uint64_t parse_errors = 0;
  uint64_t carrier_mismatches = 0;
};

CellResult run_cell(const std::vector<traffic::TraceRecord>& records, const AlgorithmConfig& alg,
                    std::size_t loops) {
  Controller controller;
  FlowConfig rule;
  rule.role = SwitchRole::kSink;
  rule.algorithm = alg;
  rule.priority = 0;
  controller.install_flow(kSinkSwitchId, rule);
  controller.set_default_port(kSinkSwitchId, 1);

  SwitchPipeline sink(kSinkSwitchId, controller);

  CellResult result;
  collector::MemoryFrameSource frames;
  uint64_t span = traffic::trace_span_ns(records);
  traffic::replay(records, span * loops, [&](const traffic::TraceRecord& record, uint64_t ts) {
    Packet pkt = packet_from_record(record, ts);
    std::vector<uint8_t> carrier = pkt.original_bytes;

    LocalTelemetry local;
    local.switch_id = kSinkSwitchId;
    local.ingress_ts_ns = ts;
    local.egress_ts_ns = ts + 500;

    auto out = sink.process(std::move(pkt), local);
    ++result.packets;
    if (!out.packet || out.packet->int_stack.has_value() ||
        out.packet->original_bytes != carrier) {
      ++result.carrier_mismatches;
    }
    if (out.report) {
      ++result.events;
      auto encoded = wire::encode_report(*out.report);
      if (encoded.ok()) frames.push(std::move(encoded).value());
    }
  });

  collector::Collector instance;
  collector::MemorySink sink_buffer;
  auto stats = instance.collect(frames, sink_buffer);
  result.forwarded = stats.forwarded;
  result.parse_errors = stats.parse_errors;
  return result;
}

std::string format_double(double value, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << value;
  return os.str();
}

}  // namespace

SweepOutcome run_sweep(const SweepSpec& spec) {
  if (spec.base_capacity <= 0.0) throw std::invalid_argument("base_capacity must be positive");
  for (std::size_t i = 1; i < spec.thresholds_us.size(); ++i) {
    if (spec.thresholds_us[i - 1] > spec.thresholds_us[i]) {
      throw std::invalid_argument("threshold list must be sorted ascending");
    }
  }

  struct Cell {
    std::string preset;
    const std::vector<traffic::TraceRecord>* records;
    AlgorithmConfig alg;
  };

  std::map<std::string, std::vector<traffic::TraceRecord>> traces;
  for (const auto& preset_name : spec.presets) {
    if (!traces.count(preset_name)) {
      traces[preset_name] =
          traffic::generate_trace(traffic::preset(preset_name).params, spec.packets, spec.seed);
    }
  }

  auto loops_for = [&](const std::vector<traffic::TraceRecord>& records) -> std::size_t {
    if (spec.duration_s <= 0.0) return spec.loops;
    uint64_t span = traffic::trace_span_ns(records);
    auto loops = static_cast<std::size_t>(spec.duration_s * 1e9 / static_cast<double>(span));
    return std::max<std::size_t>(loops, 1);
  };

  std::vector<Cell> cells;
  for (const auto& preset_name : spec.presets) {
    for (auto algorithm : spec.algorithms) {
      for (uint32_t threshold : spec.thresholds_us) {
        AlgorithmConfig alg;
        alg.kind = algorithm;
        alg.metadata_type = spec.metadata_type;
        alg.threshold = threshold;
        alg.alpha_num = spec.alpha_num;
        cells.push_back(Cell{preset_name, &traces[preset_name], alg});
      }
    }
  }

  // Cells are shared-nothing (own controller, pipeline, detector, collector)
  // and read the traces immutably, so they can run on any number of threads.
  std::vector<CellResult> results(cells.size());
  unsigned workers = std::max(1u, spec.parallel);
  if (workers == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      results[i] = run_cell(*cells[i].records, cells[i].alg, loops_for(*cells[i].records));
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
          results[i] = run_cell(*cells[i].records, cells[i].alg, loops_for(*cells[i].records));
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  SweepOutcome outcome;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = results[i];
    outcome.reports_emitted += cell.events;
    outcome.collector_forwarded += cell.forwarded;
    outcome.collector_parse_errors += cell.parse_errors;
    outcome.carrier_mismatches += cell.carrier_mismatches;

    SweepRow row;
    row.preset = cells[i].preset;
    row.algorithm = cells[i].alg.kind;
    row.threshold_us = cells[i].alg.threshold;
    row.packets = cell.packets;
    row.events = cell.events;
    row.pass_ratio =
        cell.packets == 0 ? 0.0
                          : static_cast<double>(cell.events) / static_cast<double>(cell.packets);
    if (cell.events > 0) row.potential_capacity = spec.base_capacity / row.pass_ratio;
    outcome.rows.push_back(std::move(row));
  }
  return outcome;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "preset,algorithm,threshold_us,packets,events,pass_ratio,potential_capacity_pps\n";
  for (const auto& row : rows) {
    out << row.preset << ',' << detection::algorithm_name(row.algorithm) << ','
        << row.threshold_us << ',' << row.packets << ',' << row.events << ','
        << format_double(row.pass_ratio, 6) << ',';
    if (row.potential_capacity) {
      out << format_double(*row.potential_capacity, 3);
    } else {
      out << "no-events";
    }
    out << '\n';
  }
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  write_sweep_csv(rows, os);
  return os.str();
}

std::vector<CapacityCell> run_capacity_bench(const std::vector<std::size_t>& item_counts,
                                             const std::vector<std::size_t>& hop_counts,
                                             double duration_s) {
  std::vector<CapacityCell> cells;
  for (std::size_t items : item_counts) {
    for (std::size_t hops : hop_counts) {
      CapacityCell cell;
      cell.items = items;
      cell.hops = hops;
      cell.reports_per_s = collector::bench_parse(mask_with_items(items), hops, duration_s);
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_capacity_csv(const std::vector<CapacityCell>& cells, std::ostream& out) {
  out << "items,hops,reports_per_s\n";
  for (const auto& cell : cells) {
    out << cell.items << ',' << cell.hops << ',' << format_double(cell.reports_per_s, 1) << '\n';
  }
}

CompareOutcome compare_algorithms(const std::string& preset_name,
                                  const std::vector<uint32_t>& thresholds, uint32_t alpha_num,
                                  std::size_t packets, uint64_t seed) {
  auto workload = traffic::preset(preset_name);
  auto records = traffic::generate_trace(workload.params, packets, seed);

  CompareOutcome outcome;
  std::size_t not_above = 0;
  for (uint32_t threshold : thresholds) {
    AlgorithmConfig pf;
    pf.kind = AlgorithmKind::kPerFlow;
    pf.threshold = threshold;
    AlgorithmConfig ma;
    ma.kind = AlgorithmKind::kMovingAverage;
    ma.threshold = threshold;
    ma.alpha_num = alpha_num;

    CompareRow row;
    row.threshold_us = threshold;
    for (bool e : event_sequence(records, pf)) row.per_flow_events += e;
    for (bool e : event_sequence(records, ma)) row.moving_average_events += e;
    if (row.moving_average_events <= row.per_flow_events) ++not_above;
    outcome.rows.push_back(row);
  }
  outcome.ma_not_above_fraction =
      thresholds.empty() ? 0.0 : static_cast<double>(not_above) / thresholds.size();
  return outcome;
}

void write_compare_csv(const CompareOutcome& outcome, std::ostream& out) {
  out << "threshold_us,per_flow_events,moving_average_events\n";
  for (const auto& row : outcome.rows) {
    out << row.threshold_us << ',' << row.per_flow_events << ',' << row.moving_average_events
        << '\n';
  }
}

}  // namespace intforge::bench
