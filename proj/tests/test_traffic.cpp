#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "intforge/traffic.hpp"

using namespace intforge;
using namespace intforge::traffic;
using wire::MetadataSlot;

namespace {

uint32_t occupancy(const TraceRecord& record) {
  return record.hops.at(0).get(MetadataSlot::kQueueOccupancy).value_or(0);
}

}  // namespace

TEST_CASE("a single-packet trace starts at ts zero with an empty queue") {
  auto records = generate_trace(preset("web").params, 1, 7);
  REQUIRE(records.size() == 1);
  CHECK(records[0].ts == 0);
  CHECK(occupancy(records[0]) == 0);
}

TEST_CASE("generation is deterministic under the seed") {
  auto params = preset("cache").params;
  auto a = generate_trace(params, 5000, 99);
  auto b = generate_trace(params, 5000, 99);
  CHECK(a == b);
}

TEST_CASE("distinct seeds give distinct traces") {
  auto params = preset("web").params;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto a = generate_trace(params, 2000, seed);
    auto b = generate_trace(params, 2000, seed + 1000);
    CHECK(a != b);
  }
}

TEST_CASE("timestamps never decrease and occupancy stays within the cap") {
  for (const auto& name : preset_names()) {
    auto params = preset(name).params;
    auto records = generate_trace(params, 20000, 3);
    uint64_t prev = 0;
    for (const auto& record : records) {
      CHECK(record.ts >= prev);
      prev = record.ts;
      CHECK(occupancy(record) <= static_cast<uint32_t>(params.queue_cap_us));
    }
  }
}

TEST_CASE("web occupancy stays under its queue cap ceiling") {
  auto params = preset("web").params;
  for (uint64_t seed : {1, 2}) {
    auto records = generate_trace(params, 50000, seed);
    uint32_t max_occ = 0;
    for (const auto& record : records) max_occ = std::max(max_occ, occupancy(record));
    CHECK(max_occ <= 175);
  }
}

TEST_CASE("hop latency is the base latency plus queue delay") {
  auto params = preset("cache").params;
  auto records = generate_trace(params, 5000, 5);
  for (const auto& record : records) {
    uint32_t lat = record.hops[0].get(MetadataSlot::kHopLatency).value_or(0);
    uint32_t occ = occupancy(record);
    CHECK(lat == static_cast<uint32_t>(params.base_latency_ns) + occ * 1000);
  }
}

TEST_CASE("mean burst duration orders web below cache") {
  CHECK(preset("web").params.burst_duration.mean() < preset("cache").params.burst_duration.mean());
}

TEST_CASE("multi-hop synthesis emits scaled downstream hops") {
  auto params = preset("web").params;
  params.hop_count = 3;
  auto records = generate_trace(params, 1000, 3);
  for (const auto& record : records) {
    REQUIRE(record.hops.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(record.hops[i].get(MetadataSlot::kSwitchId) ==
            params.switch_id + static_cast<uint32_t>(i));
    }
    CHECK(record.hops[2].get(MetadataSlot::kQueueOccupancy).value_or(0) <=
          record.hops[0].get(MetadataSlot::kQueueOccupancy).value_or(0));
  }
}

TEST_CASE("alternative dwell distributions generate deterministically") {
  auto params = preset("web").params;
  params.burst_duration.kind = DistKind::kExponential;
  params.burst_duration.mean_us = 40.0;
  params.inter_burst.kind = DistKind::kEmpirical;
  params.inter_burst.table_us = {80.0, 120.0, 200.0};
  auto a = generate_trace(params, 2000, 11);
  auto b = generate_trace(params, 2000, 11);
  CHECK(a == b);
  CHECK(a.size() == 2000);
}

TEST_CASE("trace files round-trip") {
  const std::string path = "/tmp/intforge_trace_roundtrip.jsonl";

  SUBCASE("empty trace") {
    write_trace({}, path);
    CHECK(read_trace(path).empty());
  }
  SUBCASE("records survive bit-exact") {
    auto records = generate_trace(preset("hadoop").params, 5000, 21);
    write_trace(records, path);
    auto loaded = read_trace(path);
    CHECK(loaded == records);

    // a second write of the loaded records produces an identical file
    const std::string path2 = path + ".2";
    write_trace(loaded, path2);
    std::ifstream f1(path), f2(path2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::remove(path2.c_str());
  }
  std::remove(path.c_str());
}

TEST_CASE("trace reader reports the offending line") {
  const std::string path = "/tmp/intforge_trace_bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"ts":0,"flow":{"src_ip":1,"dst_ip":2,"src_port":3,"dst_port":4,"proto":6},"hops":[]})"
        << "\n";
    out << "this is not json\n";
  }
  CHECK_THROWS_WITH_AS(read_trace(path), doctest::Contains("line 2"), TraceError);
  std::remove(path.c_str());
}

TEST_CASE("decreasing timestamps are rejected") {
  const std::string path = "/tmp/intforge_trace_decreasing.jsonl";
  {
    std::ofstream out(path);
    out << R"({"ts":100,"flow":{"src_ip":1,"dst_ip":2,"src_port":3,"dst_port":4,"proto":6},"hops":[]})"
        << "\n";
    out << R"({"ts":50,"flow":{"src_ip":1,"dst_ip":2,"src_port":3,"dst_port":4,"proto":6},"hops":[]})"
        << "\n";
  }
  CHECK_THROWS_WITH_AS(read_trace(path), doctest::Contains("line 2"), TraceError);
  std::remove(path.c_str());

  std::vector<TraceRecord> unsorted(2);
  unsorted[0].ts = 100;
  unsorted[1].ts = 50;
  CHECK_THROWS_AS(write_trace(unsorted, "/tmp/intforge_trace_unsorted.jsonl"), TraceError);
}

TEST_CASE("replay emits a prefix for short windows and whole cycles otherwise") {
  auto records = generate_trace(preset("web").params, 500, 13);
  uint64_t span = trace_span_ns(records);

  SUBCASE("window shorter than the trace emits a prefix") {
    uint64_t cutoff = records[250].ts;  // strictly below the last timestamp
    std::vector<uint64_t> seen;
    auto stats = replay(records, cutoff, [&](const TraceRecord&, uint64_t ts) {
      seen.push_back(ts);
    });
    CHECK(stats.packets_emitted == seen.size());
    CHECK(stats.packets_emitted < records.size());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == records[i].ts);
  }

  SUBCASE("two spans emit exactly two copies") {
    uint64_t emitted = 0;
    uint64_t last_ts = 0;
    auto stats = replay(records, 2 * span, [&](const TraceRecord&, uint64_t ts) {
      CHECK(ts >= last_ts);
      last_ts = ts;
      ++emitted;
    });
    CHECK(emitted == 2 * records.size());
    CHECK(stats.loops_completed == 2);
  }

  SUBCASE("per-loop counts are linear for stateless detection") {
    // noop marks every packet, so k loops mean exactly k times the events
    uint64_t one_loop = 0, three_loops = 0;
    replay(records, span, [&](const TraceRecord&, uint64_t) { ++one_loop; });
    replay(records, 3 * span, [&](const TraceRecord&, uint64_t) { ++three_loops; });
    CHECK(three_loops == 3 * one_loop);
  }

  SUBCASE("empty trace refuses to replay") {
    std::vector<TraceRecord> empty;
    CHECK_THROWS_AS(replay(empty, 1000, [](const TraceRecord&, uint64_t) {}), TraceError);
  }
}

TEST_CASE("unknown preset name throws") {
  CHECK_THROWS_AS(preset("warehouse"), std::invalid_argument);
}

TEST_CASE("model parameter overrides apply field by field") {
  auto base = preset("web").params;
  auto params = apply_param_overrides(base, R"({
    "queue_cap_us": 90,
    "rate_burst_pps": 123456,
    "burst_duration": {"kind": "exponential", "mean_us": 42},
    "flow": {"dst_port": 443}
  })");
  CHECK(params.queue_cap_us == 90);
  CHECK(params.rate_burst_pps == 123456);
  CHECK(params.burst_duration.kind == DistKind::kExponential);
  CHECK(params.burst_duration.mean_us == 42);
  CHECK(params.flow.dst_port == 443);
  CHECK(params.flow.dst_ip == base.flow.dst_ip);      // untouched
  CHECK(params.inter_burst.median_us == base.inter_burst.median_us);

  auto records = generate_trace(params, 3000, 4);
  for (const auto& record : records) CHECK(occupancy(record) <= 90);

  CHECK_THROWS_AS(apply_param_overrides(base, R"({"burst_rate": 1})"), TraceError);
  CHECK_THROWS_AS(apply_param_overrides(base, "not json"), TraceError);
}
