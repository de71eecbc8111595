#ifndef INTFORGE_DATAPLANE_HPP
#define INTFORGE_DATAPLANE_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "intforge/controlplane.hpp"
#include "intforge/detection.hpp"
#include "intforge/wire.hpp"

namespace intforge::dataplane {

using controlplane::FlowConfig;
using controlplane::SwitchRole;
using wire::FlowKey;
using wire::HopMetadata;
using wire::InstructionBitmask;
using wire::IntHeaderStack;
using wire::TelemetryReport;

struct Packet {
  FlowKey flow_key;
  uint32_t payload_len = 0;
  uint64_t arrival_ts = 0;  // nanoseconds
  std::optional<IntHeaderStack> int_stack;
  // Carrier packet without INT; preserved byte-exact through the pipeline.
  std::vector<uint8_t> original_bytes;

  friend bool operator==(const Packet&, const Packet&) = default;
};

// Per-packet values this switch observed locally. Supplied by the traffic
// model; hop_latency is egress - ingress and must be non-negative.
struct LocalTelemetry {
  uint32_t switch_id = 0;
  uint16_t ingress_port = 0;
  uint16_t egress_port = 0;
  uint64_t ingress_ts_ns = 0;
  uint64_t egress_ts_ns = 0;
  uint32_t queue_occupancy_us = 0;
  bool congested = false;
  uint32_t tx_util_permille = 0;

  uint32_t hop_latency_ns() const {
    return static_cast<uint32_t>(egress_ts_ns - ingress_ts_ns);
  }
};

// Fills exactly the slots named by `mask` from locally observed values.
HopMetadata make_hop(InstructionBitmask mask, const LocalTelemetry& local);

// Longest-prefix-match IPv4 forwarding. Entries are bucketed by prefix
// length; lookup probes /32 down to /0.
class ForwardingTable {
 public:
  void install(uint32_t prefix, uint8_t prefix_len, uint16_t port);
  void set_default(uint16_t port) { default_port_ = port; }
  std::optional<uint16_t> lookup(uint32_t dst_ip) const;
  bool empty() const { return empty_ && !default_port_; }

  static ForwardingTable from_entries(const std::vector<controlplane::ForwardingEntry>& entries,
                                      std::optional<uint16_t> default_port);

 private:
  std::array<std::unordered_map<uint32_t, uint16_t>, 33> buckets_;
  std::optional<uint16_t> default_port_;
  bool empty_ = true;
};

struct PipelineCounters {
  uint64_t packets = 0;
  uint64_t reports = 0;
  uint64_t int_on_ingress_anomalies = 0;
  uint64_t stack_overflows = 0;
  uint64_t no_route_drops = 0;
  uint64_t detector_anomalies = 0;
};

struct ProcessResult {
  std::optional<Packet> packet;  // empty means the forwarding stage dropped it
  std::optional<TelemetryReport> report;
  std::optional<uint16_t> egress_port;
};

// One software switch. Owns its detector state and sequence counter; a
// pipeline instance is single-threaded, packets move between instances by
// value.
class SwitchPipeline {
 public:
  SwitchPipeline(uint32_t switch_id, const controlplane::Controller& controller,
                 detection::DetectorSizes sizes = {});

  // Full pipeline: config snapshot, forwarding, then role processing.
  ProcessResult process(Packet pkt, const LocalTelemetry& local);

  // Role stages, exposed for direct use. `cfg` is the resolved flow rule.
  Packet source_process(Packet pkt, const FlowConfig& cfg, const LocalTelemetry& local,
                        uint8_t max_hops);
  Packet transit_process(Packet pkt, const LocalTelemetry& local);
  ProcessResult sink_process(Packet pkt, const FlowConfig& cfg, const LocalTelemetry& local,
                             uint64_t now_ns);

  uint32_t switch_id() const { return switch_id_; }
  const PipelineCounters& counters() const { return counters_; }
  const detection::DetectorState& detector() const { return detector_; }
  detection::DetectorState& detector() { return detector_; }
  uint32_t next_seq_no() const { return seq_no_; }

  // The sink stamps its own hop before running detection; turn off to
  // evaluate exactly the metadata that arrived.
  void set_append_sink_hop(bool on) { append_sink_hop_ = on; }

 private:
  void sync_expressions(const controlplane::SwitchState& state);

  uint32_t switch_id_;
  const controlplane::Controller& controller_;
  detection::DetectorState detector_;
  ForwardingTable table_;
  PipelineCounters counters_;
  uint32_t seq_no_ = 0;
  bool append_sink_hop_ = true;
  uint64_t synced_version_ = static_cast<uint64_t>(-1);
};

// FIFO link between pipeline instances.
template <typename T>
class Channel {
 public:
  void push(T value) { items_.push_back(std::move(value)); }
  std::optional<T> pop() {
    if (items_.empty()) return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    return value;
  }
  std::size_t size() const { return items_.size(); }

 private:
  std::deque<T> items_;
};

}  // namespace intforge::dataplane

#endif  // INTFORGE_DATAPLANE_HPP
