#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "expr_oracle.hpp"
#include "intforge/bench.hpp"
#include "intforge/controlplane.hpp"
#include "intforge/dataplane.hpp"
#include "intforge/traffic.hpp"

using namespace intforge;
using namespace intforge::controlplane;
using detection::AlgorithmKind;

namespace {

FlowConfig wildcard_rule(SwitchRole role, int priority = 0) {
  FlowConfig cfg;
  cfg.role = role;
  cfg.priority = priority;
  return cfg;
}

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = "/tmp/intforge_test_" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("wildcard rule applies to every flow") {
  FlowTable table;
  table.install(wildcard_rule(SwitchRole::kTransit));
  wire::FlowKey a{1, 2, 3, 4, 5};
  wire::FlowKey b{9, 9, 9, 9, 9};
  REQUIRE(table.resolve(a) != nullptr);
  CHECK(table.resolve(a)->role == SwitchRole::kTransit);
  CHECK(table.resolve(b)->role == SwitchRole::kTransit);
}

TEST_CASE("higher priority rule wins on overlap") {
  FlowTable table;
  table.install(wildcard_rule(SwitchRole::kTransit, 10));
  table.install(wildcard_rule(SwitchRole::kSink, 20));
  wire::FlowKey key{1, 2, 3, 4, 5};
  CHECK(table.resolve(key)->role == SwitchRole::kSink);
}

TEST_CASE("priority ties go to the more specific match") {
  FlowTable table;
  FlowConfig broad = wildcard_rule(SwitchRole::kTransit, 5);
  FlowConfig narrow = wildcard_rule(SwitchRole::kSink, 5);
  narrow.match.dst_port = 80;
  table.install(broad);
  table.install(narrow);
  CHECK(table.resolve({1, 2, 3, 80, 6})->role == SwitchRole::kSink);
  CHECK(table.resolve({1, 2, 3, 81, 6})->role == SwitchRole::kTransit);
}

TEST_CASE("duplicate match and priority is rejected") {
  FlowTable table;
  table.install(wildcard_rule(SwitchRole::kTransit, 1));
  CHECK_THROWS_AS(table.install(wildcard_rule(SwitchRole::kSink, 1)), ConfigError);
  CHECK(table.size() == 1);
}

TEST_CASE("invalid mask and algorithm combinations are rejected") {
  SUBCASE("source with empty mask") {
    FlowConfig cfg = wildcard_rule(SwitchRole::kSource);
    CHECK_THROWS_AS(validate_flow_config(cfg), ConfigError);
  }
  SUBCASE("fast algorithm observing an item outside the mask") {
    FlowConfig cfg = wildcard_rule(SwitchRole::kSource);
    cfg.mask = wire::InstructionBitmask(0x80);  // switch_id only
    cfg.algorithm.kind = AlgorithmKind::kPerFlow;
    cfg.algorithm.metadata_type = wire::MetadataSlot::kQueueOccupancy;
    CHECK_THROWS_AS(validate_flow_config(cfg), ConfigError);
  }
  SUBCASE("alpha numerator above 256") {
    FlowConfig cfg = wildcard_rule(SwitchRole::kSink);
    cfg.algorithm.alpha_num = 257;
    CHECK_THROWS_AS(validate_flow_config(cfg), ConfigError);
  }
}

TEST_CASE("per-field wildcard matching") {
  FlowMatch match;
  match.src_ip = 0x0A000001;
  match.proto = 6;
  CHECK(match.matches({0x0A000001, 7, 8, 9, 6}));
  CHECK_FALSE(match.matches({0x0A000002, 7, 8, 9, 6}));
  CHECK_FALSE(match.matches({0x0A000001, 7, 8, 9, 17}));
  CHECK(match.specificity() == 2);
}

TEST_CASE("compiler produces the expected clause shapes") {
  auto two = compile_expression("hop_latency > 10 and queue_occupancy > 100");
  REQUIRE(two.clauses.size() == 2);
  CHECK(two.clauses[0].size() == 1);
  CHECK(two.clauses[1].size() == 1);
  CHECK(two.clauses[0][0].metadata_type == wire::MetadataSlot::kHopLatency);
  CHECK(two.clauses[0][0].cmp == detection::Comparator::kGt);
  CHECK(two.clauses[0][0].constant == 10);

  auto one = compile_expression("hop_latency > 10");
  REQUIRE(one.clauses.size() == 1);
  CHECK(one.clauses[0].size() == 1);

  auto disj = compile_expression("hop_latency > 10 or queue_occupancy > 100");
  REQUIRE(disj.clauses.size() == 1);
  CHECK(disj.clauses[0].size() == 2);
}

TEST_CASE("and binds tighter than or") {
  // T or (F and F) is true; ((T or F) and F) would be false
  auto expr = compile_expression(
      "hop_latency > 0 or queue_occupancy > 999 and egress_port_tx_utilization > 999");
  wire::HopMetadata hop;
  hop.set(wire::MetadataSlot::kHopLatency, 5);
  hop.set(wire::MetadataSlot::kQueueOccupancy, 0);
  hop.set(wire::MetadataSlot::kTxUtilization, 0);
  std::vector<wire::HopMetadata> hops{hop};
  CHECK(detection::eval_cnf(expr, hops).event);

  auto grouped = compile_expression(
      "(hop_latency > 0 or queue_occupancy > 999) and egress_port_tx_utilization > 999");
  CHECK_FALSE(detection::eval_cnf(grouped, hops).event);
}

TEST_CASE("hyphenated aliases resolve to canonical items") {
  auto expr = compile_expression("hop-latency > 10 and queue-buildup > 100");
  REQUIRE(expr.clauses.size() == 2);
  CHECK(expr.clauses[0][0].metadata_type == wire::MetadataSlot::kHopLatency);
  CHECK(expr.clauses[1][0].metadata_type == wire::MetadataSlot::kQueueOccupancy);
}

TEST_CASE("compiler rejects malformed expressions") {
  CHECK_THROWS_AS(compile_expression("bogus_item > 10"), ConfigError);
  CHECK_THROWS_AS(compile_expression("hop_latency > 99999999999"), ConfigError);
  CHECK_THROWS_AS(compile_expression("hop_latency >"), ConfigError);
  CHECK_THROWS_AS(compile_expression("hop_latency > 10 and"), ConfigError);
  CHECK_THROWS_AS(compile_expression("(hop_latency > 10"), ConfigError);
  CHECK_THROWS_AS(compile_expression(""), ConfigError);
  // five conjuncts normalize to five clauses, one over the register bound
  CHECK_THROWS_AS(
      compile_expression("hop_latency > 1 and hop_latency > 2 and hop_latency > 3 and "
                         "hop_latency > 4 and hop_latency > 5"),
      ConfigError);
}

TEST_CASE("compiled CNF agrees with direct tree evaluation on random expressions") {
  std::mt19937_64 rng(90210);
  std::uniform_int_distribution<int> literal_count(1, 4);
  std::uniform_int_distribution<uint32_t> value(0, 150);
  for (int iter = 0; iter < 500; ++iter) {
    auto tree = exprtest::random_tree(literal_count(rng), rng);
    auto compiled = compile_expression(exprtest::render(*tree));
    for (int v = 0; v < 10; ++v) {
      uint32_t values[3] = {value(rng), value(rng), value(rng)};
      auto hops = exprtest::hop_for_values(values);
      REQUIRE(detection::eval_cnf(compiled, hops).event == exprtest::eval_tree(*tree, values));
    }
  }
}

TEST_CASE("runtime threshold change takes effect at the next packet") {
  auto workload = traffic::preset("web");
  auto records = traffic::generate_trace(workload.params, 20000, 42);
  const std::size_t split = 9000;

  Controller controller;
  FlowConfig rule = wildcard_rule(SwitchRole::kSink, 0);
  rule.algorithm.kind = AlgorithmKind::kPerFlow;
  rule.algorithm.metadata_type = wire::MetadataSlot::kQueueOccupancy;
  rule.algorithm.threshold = 100;
  controller.install_flow(1, rule);

  dataplane::SwitchPipeline pipeline(1, controller);
  pipeline.set_append_sink_hop(false);

  uint64_t pipeline_events = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i == split) {
      FlowConfig update = rule;
      update.priority = 10;
      update.algorithm.threshold = 150;
      controller.install_flow(1, update);
    }
    auto pkt = bench::packet_from_record(records[i], records[i].ts);
    dataplane::LocalTelemetry local;
    local.switch_id = 1;
    auto out = pipeline.process(std::move(pkt), local);
    pipeline_events += out.report.has_value();
  }

  // oracle: same trace replayed over one continuous detector state with the
  // threshold switched at the same packet index
  detection::DetectorState oracle_state;
  uint64_t oracle_events = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    detection::AlgorithmConfig cfg = rule.algorithm;
    cfg.threshold = i < split ? 100 : 150;
    oracle_events +=
        detection::evaluate(oracle_state, records[i].flow_key, records[i].hops, cfg).event;
  }

  CHECK(pipeline_events == oracle_events);

  // and the change had to matter: replaying everything at 100 gives a
  // different count
  detection::DetectorState flat_state;
  uint64_t flat_events = 0;
  for (const auto& record : records) {
    flat_events +=
        detection::evaluate(flat_state, record.flow_key, record.hops, rule.algorithm).event;
  }
  CHECK(flat_events != pipeline_events);
}

TEST_CASE("minimal config document loads and applies") {
  std::string path = write_temp("minimal.json", R"({
    "switches": [
      {
        "id": 1,
        "flows": [
          {"role": "transit", "priority": 0}
        ]
      }
    ]
  })");
  Controller controller;
  controller.load_config(path);
  auto state = controller.snapshot(1);
  REQUIRE(state != nullptr);
  CHECK(state->flows.resolve({1, 2, 3, 4, 5})->role == SwitchRole::kTransit);
  std::remove(path.c_str());
}

TEST_CASE("documents with unknown algorithm names change nothing") {
  Controller controller;
  controller.install_flow(1, wildcard_rule(SwitchRole::kTransit));
  auto before = controller.snapshot(1);
  auto version = controller.version();

  std::string path = write_temp("bad_alg.json", R"({
    "switches": [
      {
        "id": 1,
        "flows": [
          {"role": "sink", "priority": 3, "algorithm": {"kind": "quantile_sketch"}}
        ]
      }
    ]
  })");
  CHECK_THROWS_AS(controller.load_config(path), ConfigError);
  CHECK(controller.snapshot(1) == before);
  CHECK(controller.version() == version);
  std::remove(path.c_str());
}

TEST_CASE("a bad switch section rejects the whole document") {
  Controller controller;
  std::string path = write_temp("partial.json", R"({
    "switches": [
      {"id": 1, "flows": [{"role": "transit"}]},
      {"id": 2, "flows": [{"role": "nonsense"}]}
    ]
  })");
  CHECK_THROWS_AS(controller.load_config(path), ConfigError);
  CHECK(controller.snapshot(1) == nullptr);
  CHECK(controller.snapshot(2) == nullptr);
  std::remove(path.c_str());
}

TEST_CASE("config parses matches, masks, expressions and forwarding") {
  std::string path = write_temp("full.json", R"({
    "switches": [
      {
        "id": 7,
        "max_hops": 4,
        "flows": [
          {
            "match": {"src_ip": "10.0.0.1", "dst_port": 80, "proto": 17},
            "role": "source",
            "mask": ["switch_id", "hop_latency", "queue_occupancy"],
            "algorithm": {"kind": "per_flow", "metadata_type": "queue_occupancy", "threshold": 100},
            "priority": 10
          },
          {"role": "off", "priority": 0}
        ],
        "expressions": [
          {"index": 0, "text": "hop_latency > 10 and queue_occupancy > 100"}
        ],
        "forwarding": [
          {"prefix": "10.0.1.0", "len": 24, "port": 2},
          {"default": true, "port": 1}
        ]
      }
    ]
  })");
  Controller controller;
  controller.load_config(path);
  auto state = controller.snapshot(7);
  REQUIRE(state != nullptr);
  CHECK(state->max_hops == 4);
  CHECK(state->flows.size() == 2);

  const auto* rule = state->flows.resolve({0x0A000001, 0x0A000101, 40000, 80, 17});
  REQUIRE(rule != nullptr);
  CHECK(rule->role == SwitchRole::kSource);
  CHECK(rule->mask.bits() == 0xB0);
  CHECK(rule->algorithm.kind == AlgorithmKind::kPerFlow);
  CHECK(rule->algorithm.threshold == 100);

  CHECK(state->flows.resolve({0x0A000009, 0x0A000101, 40000, 81, 17})->role == SwitchRole::kOff);
  REQUIRE(state->expressions.count(0) == 1);
  CHECK(state->expressions.at(0).clauses.size() == 2);
  REQUIRE(state->forwarding.size() == 1);
  CHECK(state->forwarding[0].prefix == 0x0A000100);
  CHECK(state->default_port == 1);
  std::remove(path.c_str());
}

TEST_CASE("the shipped single-sink config drives the pipeline as written") {
  Controller controller;
  controller.load_config(std::string(TESTDATA_DIR) + "/../configs/single_sink.json");
  auto state = controller.snapshot(1);
  REQUIRE(state != nullptr);

  auto records = traffic::generate_trace(traffic::preset("web").params, 30000, 8);
  dataplane::SwitchPipeline pipeline(1, controller);
  pipeline.set_append_sink_hop(false);
  uint64_t events = 0;
  for (const auto& record : records) {
    auto pkt = bench::packet_from_record(record, record.ts);
    dataplane::LocalTelemetry local;
    local.switch_id = 1;
    auto out = pipeline.process(std::move(pkt), local);
    events += out.report.has_value();
  }

  // oracle: the rule the file spells out, evaluated directly
  detection::AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::kPerFlow;
  cfg.metadata_type = wire::MetadataSlot::kQueueOccupancy;
  cfg.threshold = 100;
  detection::DetectorState oracle;
  uint64_t expected = 0;
  for (const auto& record : records) {
    expected += detection::evaluate(oracle, record.flow_key, record.hops, cfg).event;
  }
  CHECK(events == expected);
  CHECK(events > 0);
}

TEST_CASE("install_flow failure leaves the published snapshot untouched") {
  Controller controller;
  controller.install_flow(3, wildcard_rule(SwitchRole::kTransit, 1));
  auto before = controller.snapshot(3);
  CHECK_THROWS_AS(controller.install_flow(3, wildcard_rule(SwitchRole::kSink, 1)), ConfigError);
  CHECK(controller.snapshot(3) == before);
}
