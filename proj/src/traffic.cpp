#include "intforge/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace intforge::traffic {

using json = nlohmann::json;
using wire::MetadataSlot;

double DwellDist::sample_us(std::mt19937_64& rng) const {
  double value = 0.0;
  switch (kind) {
    case DistKind::kExponential: {
      std::exponential_distribution<double> dist(1.0 / mean_us);
      value = dist(rng);
      break;
    }
    case DistKind::kLognormal: {
      std::lognormal_distribution<double> dist(std::log(median_us), sigma);
      value = dist(rng);
      break;
    }
    case DistKind::kEmpirical: {
      if (table_us.empty()) throw TraceError("empirical dwell distribution with empty table");
      std::uniform_int_distribution<std::size_t> dist(0, table_us.size() - 1);
      value = table_us[dist(rng)];
      break;
    }
  }
  return std::max(value, 0.5);  // floor keeps state dwells from collapsing
}

double DwellDist::mean() const {
  switch (kind) {
    case DistKind::kExponential:
      return mean_us;
    case DistKind::kLognormal:
      return median_us * std::exp(sigma * sigma / 2.0);
    case DistKind::kEmpirical: {
      if (table_us.empty()) return 0.0;
      double sum = 0.0;
      for (double v : table_us) sum += v;
      return sum / static_cast<double>(table_us.size());
    }
  }
  return 0.0;
}

WorkloadPreset preset(const std::string& name) {
  BurstModelParams p;
  if (name == "web") {
    // Short, sparse bursts; the queue never accumulates much.
    p.burst_duration = {DistKind::kLognormal, 0, 30.0, 0.4, {}};
    p.inter_burst = {DistKind::kLognormal, 0, 140.0, 0.6, {}};
    p.rate_burst_pps = 350000.0;
    p.rate_idle_pps = 25000.0;
    p.queue_build_rate = 4.0;
    p.queue_drain_rate = 2.0;
    p.queue_cap_us = 170.0;
    p.switch_id = 1;
  } else if (name == "cache") {
    // Longer bursts and deeper queue buildup than web.
    p.burst_duration = {DistKind::kLognormal, 0, 120.0, 0.7, {}};
    p.inter_burst = {DistKind::kLognormal, 0, 180.0, 0.7, {}};
    p.rate_burst_pps = 300000.0;
    p.rate_idle_pps = 30000.0;
    p.queue_build_rate = 6.0;
    p.queue_drain_rate = 3.0;
    p.queue_cap_us = 1200.0;
    p.switch_id = 2;
  } else if (name == "hadoop") {
    // Sustained shuffle-style bursts, the deepest queues of the three.
    p.burst_duration = {DistKind::kLognormal, 0, 200.0, 0.8, {}};
    p.inter_burst = {DistKind::kLognormal, 0, 150.0, 0.7, {}};
    p.rate_burst_pps = 200000.0;
    p.rate_idle_pps = 40000.0;
    p.queue_build_rate = 6.0;
    p.queue_drain_rate = 5.0;
    p.queue_cap_us = 2000.0;
    p.switch_id = 3;
  } else {
    throw std::invalid_argument("unknown workload preset '" + name + "'");
  }
  return WorkloadPreset{name, p};
}

std::vector<std::string> preset_names() { return {"web", "cache", "hadoop"}; }

namespace {

DwellDist dwell_from_json(const json& j, const std::string& where, DwellDist base) {
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      std::string kind = value.get<std::string>();
      if (kind == "exponential") base.kind = DistKind::kExponential;
      else if (kind == "lognormal") base.kind = DistKind::kLognormal;
      else if (kind == "empirical") base.kind = DistKind::kEmpirical;
      else throw TraceError(where + ".kind: unknown distribution '" + kind + "'");
    } else if (key == "mean_us") {
      base.mean_us = value.get<double>();
    } else if (key == "median_us") {
      base.median_us = value.get<double>();
    } else if (key == "sigma") {
      base.sigma = value.get<double>();
    } else if (key == "table_us") {
      base.table_us = value.get<std::vector<double>>();
    } else {
      throw TraceError(where + ": unknown key '" + key + "'");
    }
  }
  return base;
}

}  // namespace

BurstModelParams apply_param_overrides(BurstModelParams base, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw TraceError(std::string("model overrides are not valid JSON: ") + e.what());
  }
  for (const auto& [key, value] : doc.items()) {
    if (key == "burst_duration") {
      base.burst_duration = dwell_from_json(value, key, base.burst_duration);
    } else if (key == "inter_burst") {
      base.inter_burst = dwell_from_json(value, key, base.inter_burst);
    } else if (key == "rate_burst_pps") {
      base.rate_burst_pps = value.get<double>();
    } else if (key == "rate_idle_pps") {
      base.rate_idle_pps = value.get<double>();
    } else if (key == "queue_build_rate") {
      base.queue_build_rate = value.get<double>();
    } else if (key == "queue_drain_rate") {
      base.queue_drain_rate = value.get<double>();
    } else if (key == "queue_cap_us") {
      base.queue_cap_us = value.get<double>();
    } else if (key == "base_latency_ns") {
      base.base_latency_ns = value.get<double>();
    } else if (key == "switch_id") {
      base.switch_id = value.get<uint32_t>();
    } else if (key == "hop_count") {
      base.hop_count = value.get<int>();
    } else if (key == "flow") {
      base.flow.src_ip = value.value("src_ip", base.flow.src_ip);
      base.flow.dst_ip = value.value("dst_ip", base.flow.dst_ip);
      base.flow.src_port = value.value("src_port", base.flow.src_port);
      base.flow.dst_port = value.value("dst_port", base.flow.dst_port);
      base.flow.proto = value.value("proto", base.flow.proto);
    } else {
      throw TraceError("model overrides: unknown key '" + key + "'");
    }
  }
  return base;
}

BurstModelParams load_params_file(const std::string& path, BurstModelParams base) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open model params file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return apply_param_overrides(std::move(base), buffer.str());
}

namespace {

std::vector<wire::HopMetadata> make_hops(const BurstModelParams& params, double occupancy_us,
                                         uint64_t ts_ns) {
  std::vector<wire::HopMetadata> hops;
  int count = std::max(params.hop_count, 1);
  hops.reserve(count);
  for (int i = 0; i < count; ++i) {
    // Downstream hops see a scaled-down version of the same queue.
    double occ = occupancy_us / static_cast<double>(i + 1);
    uint32_t occ_u = static_cast<uint32_t>(std::llround(occ));
    wire::HopMetadata hop;
    hop.set(MetadataSlot::kSwitchId, params.switch_id + static_cast<uint32_t>(i));
    hop.set(MetadataSlot::kQueueOccupancy, occ_u);
    hop.set(MetadataSlot::kHopLatency,
            static_cast<uint32_t>(std::llround(params.base_latency_ns)) + occ_u * 1000);
    hops.push_back(std::move(hop));
    (void)ts_ns;
  }
  return hops;
}

}  // namespace

std::vector<TraceRecord> generate_trace(const BurstModelParams& params, std::size_t n_packets,
                                        uint64_t seed) {
  if (n_packets < 1) throw TraceError("n_packets must be >= 1");
  if (params.rate_burst_pps <= 0.0 && params.rate_idle_pps <= 0.0) {
    throw TraceError("both packet rates are zero, trace would be empty");
  }
  std::mt19937_64 rng(seed);

  std::vector<TraceRecord> records;
  records.reserve(n_packets);

  bool in_burst = true;
  double state_start_us = 0.0;
  double state_occ_us = 0.0;  // occupancy at state entry
  double state_end_us = state_start_us +
                        (in_burst ? params.burst_duration : params.inter_burst).sample_us(rng);
  double next_packet_us = 0.0;

  auto occupancy_at = [&](double t_us) {
    double dt = t_us - state_start_us;
    double occ = in_burst ? state_occ_us + params.queue_build_rate * dt
                          : state_occ_us - params.queue_drain_rate * dt;
    return std::clamp(occ, 0.0, params.queue_cap_us);
  };

  while (records.size() < n_packets) {
    double rate = in_burst ? params.rate_burst_pps : params.rate_idle_pps;
    bool emits = rate > 0.0;
    double gap_us = emits ? 1e6 / rate : 0.0;

    if (emits && next_packet_us < state_end_us) {
      TraceRecord record;
      record.ts = static_cast<uint64_t>(std::llround(next_packet_us * 1000.0));
      record.flow_key = params.flow;
      record.hops = make_hops(params, occupancy_at(next_packet_us), record.ts);
      records.push_back(std::move(record));
      next_packet_us += gap_us;
      continue;
    }

    // state transition; packet cadence restarts at the state boundary
    state_occ_us = occupancy_at(state_end_us);
    state_start_us = state_end_us;
    in_burst = !in_burst;
    state_end_us = state_start_us +
                   (in_burst ? params.burst_duration : params.inter_burst).sample_us(rng);
    next_packet_us = state_start_us;
  }
  return records;
}

// ---------------------------------------------------------------------------
// Trace files: JSON lines
// ---------------------------------------------------------------------------

namespace {

json hop_to_json(const wire::HopMetadata& hop) {
  json j = json::object();
  for (std::size_t i = 0; i < wire::kSlotCount; ++i) {
    auto slot = static_cast<MetadataSlot>(i);
    if (auto v = hop.get(slot)) j[wire::slot_name(slot)] = *v;
  }
  return j;
}

wire::HopMetadata hop_from_json(const json& j, std::size_t line_no) {
  wire::HopMetadata hop;
  for (const auto& [name, value] : j.items()) {
    auto slot = wire::slot_from_name(name);
    if (!slot) {
      throw TraceError("line " + std::to_string(line_no) + ": unknown telemetry item '" + name +
                       "'");
    }
    if (!value.is_number_unsigned() || value.get<uint64_t>() > 0xFFFFFFFFull) {
      throw TraceError("line " + std::to_string(line_no) + ": item '" + name +
                       "' is not a 32-bit unsigned value");
    }
    hop.set(*slot, value.get<uint32_t>());
  }
  return hop;
}

}  // namespace

void write_trace(const std::vector<TraceRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open '" + path + "' for writing");
  uint64_t prev_ts = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.ts < prev_ts) {
      throw TraceError("records not sorted by ts at index " + std::to_string(i));
    }
    prev_ts = r.ts;
    json j;
    j["ts"] = r.ts;
    j["flow"] = {{"src_ip", r.flow_key.src_ip},   {"dst_ip", r.flow_key.dst_ip},
                 {"src_port", r.flow_key.src_port}, {"dst_port", r.flow_key.dst_port},
                 {"proto", r.flow_key.proto}};
    json hops = json::array();
    for (const auto& hop : r.hops) hops.push_back(hop_to_json(hop));
    j["hops"] = std::move(hops);
    out << j.dump() << '\n';
  }
  if (!out) throw TraceError("write to '" + path + "' failed");
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  uint64_t prev_ts = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
    }
    TraceRecord record;
    try {
      record.ts = j.at("ts").get<uint64_t>();
      const auto& flow = j.at("flow");
      record.flow_key.src_ip = flow.at("src_ip").get<uint32_t>();
      record.flow_key.dst_ip = flow.at("dst_ip").get<uint32_t>();
      record.flow_key.src_port = flow.at("src_port").get<uint16_t>();
      record.flow_key.dst_port = flow.at("dst_port").get<uint16_t>();
      record.flow_key.proto = flow.at("proto").get<uint8_t>();
      for (const auto& hop : j.at("hops")) record.hops.push_back(hop_from_json(hop, line_no));
    } catch (const json::exception& e) {
      throw TraceError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!records.empty() && record.ts < prev_ts) {
      throw TraceError("line " + std::to_string(line_no) + ": timestamp decreases");
    }
    prev_ts = record.ts;
    records.push_back(std::move(record));
  }
  return records;
}

uint64_t trace_span_ns(const std::vector<TraceRecord>& records) {
  if (records.empty()) return 0;
  uint64_t last = records.back().ts;
  uint64_t tail_gap = 1000;
  if (records.size() >= 2) {
    uint64_t prev = records[records.size() - 2].ts;
    if (last > prev) tail_gap = last - prev;
  }
  return last + tail_gap;
}

}  // namespace intforge::traffic
