#ifndef INTFORGE_TRAFFIC_HPP
#define INTFORGE_TRAFFIC_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "intforge/wire.hpp"

namespace intforge::traffic {

enum class DistKind { kExponential, kLognormal, kEmpirical };

// Dwell-time distribution, parameters in microseconds.
struct DwellDist {
  DistKind kind = DistKind::kLognormal;
  double mean_us = 100.0;    // exponential
  double median_us = 100.0;  // lognormal scale (exp of the underlying mean)
  double sigma = 0.5;        // lognormal shape
  std::vector<double> table_us;  // empirical, sampled uniformly

  double sample_us(std::mt19937_64& rng) const;
  double mean() const;
};

// Two-state burst Markov model: alternating Burst/Idle dwells, fluid queue
// that builds during bursts and drains when idle, clamped to [0, cap].
struct BurstModelParams {
  DwellDist burst_duration;
  DwellDist inter_burst;
  double rate_burst_pps = 300000.0;
  double rate_idle_pps = 30000.0;
  double queue_build_rate = 5.0;   // us of occupancy per us in Burst
  double queue_drain_rate = 2.0;   // us per us in Idle
  double queue_cap_us = 170.0;
  double base_latency_ns = 1000.0;  // hop latency floor; queueing adds occ * 1000 ns
  uint32_t switch_id = 1;
  int hop_count = 1;  // extra hops are synthesized with scaled-down occupancy
  wire::FlowKey flow{0x0A000001, 0x0A000101, 40000, 80, 17};  // 10.0.0.1 -> 10.0.1.1
  uint64_t seed = 1;
};

struct TraceRecord {
  uint64_t ts = 0;  // ns offset from trace start, non-decreasing
  wire::FlowKey flow_key;
  std::vector<wire::HopMetadata> hops;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct WorkloadPreset {
  std::string name;
  BurstModelParams params;
};

// web | cache | hadoop. Parameters are synthetic calibrations, not measured
// values; every field can be overridden through the config file.
WorkloadPreset preset(const std::string& name);  // throws std::invalid_argument
std::vector<std::string> preset_names();

// Partial JSON override of model parameters on top of `base`; unknown keys
// are rejected.
BurstModelParams apply_param_overrides(BurstModelParams base, const std::string& json_text);
BurstModelParams load_params_file(const std::string& path, BurstModelParams base);

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

std::vector<TraceRecord> generate_trace(const BurstModelParams& params, std::size_t n_packets,
                                        uint64_t seed);

// JSON-lines, one record per line.
void write_trace(const std::vector<TraceRecord>& records, const std::string& path);
std::vector<TraceRecord> read_trace(const std::string& path);  // throws TraceError

// Cycle length used when a trace is looped: last timestamp plus one trailing
// inter-packet gap.
uint64_t trace_span_ns(const std::vector<TraceRecord>& records);

struct ReplayStats {
  uint64_t packets_emitted = 0;
  uint64_t loops_completed = 0;
};

// Emits records cyclically, rebasing timestamps each cycle, until the rebased
// timestamp would reach `loop_for_ns`. Deliver receives the record and its
// rebased timestamp.
template <typename Fn>
ReplayStats replay(const std::vector<TraceRecord>& records, uint64_t loop_for_ns, Fn&& deliver) {
  if (records.empty()) throw TraceError("replay of an empty trace");
  ReplayStats stats;
  const uint64_t span = trace_span_ns(records);
  for (uint64_t base = 0; base < loop_for_ns; base += span) {
    bool full_loop = true;
    for (const auto& record : records) {
      uint64_t ts = base + record.ts;
      if (ts >= loop_for_ns) {
        full_loop = false;
        break;
      }
      deliver(record, ts);
      ++stats.packets_emitted;
    }
    if (full_loop) ++stats.loops_completed;
  }
  return stats;
}

}  // namespace intforge::traffic

#endif  // INTFORGE_TRAFFIC_HPP
