#include "intforge/dataplane.hpp"

namespace intforge::dataplane {

using detection::AlgorithmKind;
using wire::MetadataSlot;
using wire::PushStatus;

HopMetadata make_hop(InstructionBitmask mask, const LocalTelemetry& local) {
  HopMetadata hop;
  if (mask.has(MetadataSlot::kSwitchId)) hop.set(MetadataSlot::kSwitchId, local.switch_id);
  if (mask.has(MetadataSlot::kPortIds)) {
    hop.set(MetadataSlot::kPortIds,
            (static_cast<uint32_t>(local.ingress_port) << 16) | local.egress_port);
  }
  if (mask.has(MetadataSlot::kHopLatency)) hop.set(MetadataSlot::kHopLatency, local.hop_latency_ns());
  if (mask.has(MetadataSlot::kQueueOccupancy))
    hop.set(MetadataSlot::kQueueOccupancy, local.queue_occupancy_us);
  if (mask.has(MetadataSlot::kIngressTimestamp))
    hop.set(MetadataSlot::kIngressTimestamp, static_cast<uint32_t>(local.ingress_ts_ns));
  if (mask.has(MetadataSlot::kEgressTimestamp))
    hop.set(MetadataSlot::kEgressTimestamp, static_cast<uint32_t>(local.egress_ts_ns));
  if (mask.has(MetadataSlot::kQueueCongestion))
    hop.set(MetadataSlot::kQueueCongestion, local.congested ? 1 : 0);
  if (mask.has(MetadataSlot::kTxUtilization))
    hop.set(MetadataSlot::kTxUtilization, local.tx_util_permille);
  return hop;
}

void ForwardingTable::install(uint32_t prefix, uint8_t prefix_len, uint16_t port) {
  uint32_t mask = prefix_len == 0 ? 0 : 0xFFFFFFFFu << (32 - prefix_len);
  buckets_[prefix_len][prefix & mask] = port;
  empty_ = false;
}

std::optional<uint16_t> ForwardingTable::lookup(uint32_t dst_ip) const {
  for (int len = 32; len >= 0; --len) {
    const auto& bucket = buckets_[len];
    if (bucket.empty()) continue;
    uint32_t mask = len == 0 ? 0 : 0xFFFFFFFFu << (32 - len);
    auto it = bucket.find(dst_ip & mask);
    if (it != bucket.end()) return it->second;
  }
  return default_port_;
}

ForwardingTable ForwardingTable::from_entries(
    const std::vector<controlplane::ForwardingEntry>& entries,
    std::optional<uint16_t> default_port) {
  ForwardingTable table;
  for (const auto& e : entries) table.install(e.prefix, e.prefix_len, e.port);
  if (default_port) table.set_default(*default_port);
  return table;
}

SwitchPipeline::SwitchPipeline(uint32_t switch_id, const controlplane::Controller& controller,
                               detection::DetectorSizes sizes)
    : switch_id_(switch_id), controller_(controller), detector_(sizes) {}

void SwitchPipeline::sync_expressions(const controlplane::SwitchState& state) {
  // Expressions travel through their register encoding, like any other
  // register write from the controller. Stale registers keep old contents.
  for (const auto& [index, expr] : state.expressions) {
    auto decoded = detection::decode_cnf(detection::encode_cnf(expr));
    if (decoded.ok()) detector_.install_expression(index, std::move(decoded).value());
  }
}

Packet SwitchPipeline::source_process(Packet pkt, const FlowConfig& cfg,
                                      const LocalTelemetry& local, uint8_t max_hops) {
  if (pkt.int_stack.has_value()) {
    // Unexpected INT on ingress at a source: forward untouched, count it.
    ++counters_.int_on_ingress_anomalies;
    return pkt;
  }
  IntHeaderStack stack;
  stack.mask = cfg.mask;
  stack.max_hops = max_hops;
  push_hop(stack, make_hop(cfg.mask, local));
  pkt.int_stack = std::move(stack);
  return pkt;
}

Packet SwitchPipeline::transit_process(Packet pkt, const LocalTelemetry& local) {
  if (!pkt.int_stack.has_value()) return pkt;
  auto status = push_hop(*pkt.int_stack, make_hop(pkt.int_stack->mask, local));
  if (status == PushStatus::kOverflow) ++counters_.stack_overflows;
  return pkt;
}

ProcessResult SwitchPipeline::sink_process(Packet pkt, const FlowConfig& cfg,
                                           const LocalTelemetry& local, uint64_t now_ns) {
  ProcessResult result;
  if (!pkt.int_stack.has_value()) {
    result.packet = std::move(pkt);
    return result;
  }
  IntHeaderStack stack = std::move(*pkt.int_stack);
  pkt.int_stack.reset();

  if (append_sink_hop_) {
    auto status = push_hop(stack, make_hop(stack.mask, local));
    if (status == PushStatus::kOverflow) ++counters_.stack_overflows;
  }

  auto verdict = detection::evaluate(detector_, pkt.flow_key, stack.hops, cfg.algorithm);
  counters_.detector_anomalies = detector_.anomalies();
  if (verdict.event) {
    TelemetryReport report;
    report.version = 1;
    report.hw_id = static_cast<uint8_t>(switch_id_ & 0x3f);
    report.seq_no = seq_no_++;
    report.sink_node_id = switch_id_;
    report.report_ts = static_cast<uint32_t>(now_ns / 1000);
    report.flow_key = pkt.flow_key;
    report.mask = stack.mask;
    report.max_hops = stack.max_hops;
    report.md_reserved = stack.md_reserved;
    report.hops = std::move(stack.hops);
    result.report = std::move(report);
    ++counters_.reports;
  }
  result.packet = std::move(pkt);
  return result;
}

ProcessResult SwitchPipeline::process(Packet pkt, const LocalTelemetry& local) {
  ++counters_.packets;
  // Config is re-read at every packet boundary; the derived forwarding table
  // and expression registers are rebuilt only when the version moved.
  auto [state, version] = controller_.snapshot_versioned(switch_id_);
  if (state && version != synced_version_) {
    sync_expressions(*state);
    table_ = ForwardingTable::from_entries(state->forwarding, state->default_port);
    synced_version_ = version;
  }

  ProcessResult result;
  std::optional<uint16_t> egress;
  const FlowConfig* cfg = nullptr;
  uint8_t max_hops = 8;
  if (state) {
    if (!table_.empty()) {
      egress = table_.lookup(pkt.flow_key.dst_ip);
      if (!egress) {
        ++counters_.no_route_drops;
        return result;  // drop verdict
      }
    }
    cfg = state->flows.resolve(pkt.flow_key);
    max_hops = state->max_hops;
  }
  result.egress_port = egress;

  SwitchRole role = cfg ? cfg->role : SwitchRole::kOff;
  switch (role) {
    case SwitchRole::kSource:
      result.packet = source_process(std::move(pkt), *cfg, local, max_hops);
      break;
    case SwitchRole::kTransit:
      result.packet = transit_process(std::move(pkt), local);
      break;
    case SwitchRole::kSink: {
      auto sink = sink_process(std::move(pkt), *cfg, local, local.egress_ts_ns);
      result.packet = std::move(sink.packet);
      result.report = std::move(sink.report);
      break;
    }
    case SwitchRole::kOff:
      result.packet = std::move(pkt);
      break;
  }
  return result;
}

}  // namespace intforge::dataplane
