#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "intforge/bench.hpp"
#include "intforge/collector.hpp"
#include "intforge/controlplane.hpp"
#include "intforge/dataplane.hpp"
#include "intforge/traffic.hpp"

using namespace intforge;

namespace {

detection::AlgorithmKind parse_algorithm(const std::string& name) {
  std::string canon = name;
  std::replace(canon.begin(), canon.end(), '-', '_');
  if (canon == "per_hop") return detection::AlgorithmKind::kPerHop;
  if (canon == "per_flow") return detection::AlgorithmKind::kPerFlow;
  if (canon == "moving_average") return detection::AlgorithmKind::kMovingAverage;
  if (canon == "noop") return detection::AlgorithmKind::kNoop;
  if (canon == "complex") return detection::AlgorithmKind::kComplex;
  throw CLI::ValidationError("unknown algorithm '" + name + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

struct RunFlags {
  std::string preset = "web";
  std::string trace_path;
  std::string config_path;
  std::size_t packets = 200000;
  std::size_t loops = 1;
  uint64_t seed = 1;
  std::string algorithm = "per_flow";
  uint32_t threshold = 100;
  uint32_t alpha = 64;
  uint32_t expr_index = 0;
  uint32_t switch_id = 0;  // 0 means: first configured switch / builtin sink
};

std::vector<traffic::TraceRecord> load_records(const RunFlags& flags) {
  if (!flags.trace_path.empty()) return traffic::read_trace(flags.trace_path);
  return traffic::generate_trace(traffic::preset(flags.preset).params, flags.packets, flags.seed);
}

// Prepares the controller per flags/config; returns the switch id to drive.
uint32_t configure_sink(controlplane::Controller& controller, const RunFlags& flags) {
  if (!flags.config_path.empty()) {
    controller.load_config(flags.config_path);
    auto doc = controlplane::load_config_file(flags.config_path);
    if (doc.switches.empty()) throw std::runtime_error("config names no switches");
    if (flags.switch_id != 0) return flags.switch_id;
    return doc.switches.front().switch_id;
  }
  controlplane::FlowConfig rule;
  rule.role = controlplane::SwitchRole::kSink;
  rule.algorithm.kind = parse_algorithm(flags.algorithm);
  rule.algorithm.metadata_type = wire::MetadataSlot::kQueueOccupancy;
  rule.algorithm.threshold = flags.threshold;
  rule.algorithm.alpha_num = flags.alpha;
  rule.algorithm.expr_index = flags.expr_index;
  uint32_t id = flags.switch_id != 0 ? flags.switch_id : 100;
  controller.install_flow(id, rule);
  controller.set_default_port(id, 1);
  return id;
}

int cmd_gen(const RunFlags& flags, int hops, const std::string& params_path,
            const std::string& out_path) {
  auto workload = traffic::preset(flags.preset);
  workload.params.hop_count = hops;
  if (!params_path.empty()) {
    workload.params = traffic::load_params_file(params_path, workload.params);
  }
  auto records = traffic::generate_trace(workload.params, flags.packets, flags.seed);
  traffic::write_trace(records, out_path);
  uint32_t max_occ = 0;
  for (const auto& r : records) {
    for (const auto& hop : r.hops) {
      max_occ = std::max(max_occ, hop.get(wire::MetadataSlot::kQueueOccupancy).value_or(0));
    }
  }
  std::cout << "wrote " << records.size() << " records to " << out_path
            << " (span " << traffic::trace_span_ns(records) / 1e6 << " ms, max occupancy "
            << max_occ << " us)\n";
  return 0;
}

int cmd_run(const RunFlags& flags) {
  auto records = load_records(flags);
  controlplane::Controller controller;
  uint32_t switch_id = configure_sink(controller, flags);
  dataplane::SwitchPipeline pipeline(switch_id, controller);

  collector::MemoryFrameSource frames;
  uint64_t packets = 0, events = 0, drops = 0;
  uint64_t span = traffic::trace_span_ns(records);
  traffic::replay(records, span * flags.loops,
                  [&](const traffic::TraceRecord& record, uint64_t ts) {
                    auto pkt = bench::packet_from_record(record, ts);
                    dataplane::LocalTelemetry local;
                    local.switch_id = switch_id;
                    local.ingress_ts_ns = ts;
                    local.egress_ts_ns = ts + 500;
                    auto out = pipeline.process(std::move(pkt), local);
                    ++packets;
                    drops += !out.packet.has_value();
                    if (out.report) {
                      ++events;
                      auto encoded = wire::encode_report(*out.report);
                      if (encoded.ok()) frames.push(std::move(encoded).value());
                    }
                  });

  collector::Collector instance;
  collector::MemorySink sink;
  auto stats = instance.collect(frames, sink);

  double ratio = packets ? static_cast<double>(events) / packets : 0.0;
  std::cout << "packets " << packets << ", events " << events << ", pass_ratio " << ratio
            << ", forwarded " << stats.forwarded << ", parse_errors " << stats.parse_errors
            << ", drops " << drops << "\n";
  const auto& counters = pipeline.counters();
  std::cout << "sink counters: reports " << counters.reports << ", overflows "
            << counters.stack_overflows << ", int_on_ingress "
            << counters.int_on_ingress_anomalies << ", detector_anomalies "
            << counters.detector_anomalies << "\n";
  if (stats.forwarded + stats.parse_errors != events) {
    std::cerr << "conservation violated: events " << events << " vs collector "
              << stats.forwarded + stats.parse_errors << "\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const bench::SweepSpec& spec, const std::string& out_path) {
  auto outcome = bench::run_sweep(spec);

  bool violated = false;
  std::map<std::pair<std::string, detection::AlgorithmKind>, uint64_t> last_events;
  for (const auto& row : outcome.rows) {
    if (row.pass_ratio < 0.0 || row.pass_ratio > 1.0) violated = true;
    if (row.potential_capacity && *row.potential_capacity < spec.base_capacity) violated = true;
    if (row.algorithm == detection::AlgorithmKind::kNoop && row.pass_ratio != 1.0)
      violated = true;
    auto key = std::make_pair(row.preset, row.algorithm);
    if (last_events.count(key) && row.events > last_events[key] &&
        row.algorithm != detection::AlgorithmKind::kMovingAverage) {
      violated = true;  // thresholds ascend, so event counts must not
    }
    last_events[key] = row.events;
  }
  if (outcome.collector_forwarded != outcome.reports_emitted || outcome.carrier_mismatches != 0) {
    violated = true;
  }

  if (out_path.empty()) {
    bench::write_sweep_csv(outcome.rows, std::cout);
  } else {
    auto out = open_out(out_path);
    bench::write_sweep_csv(outcome.rows, out);
    std::cout << "wrote " << outcome.rows.size() << " rows to " << out_path << "\n";
  }
  if (violated) {
    std::cerr << "sweep invariant violation detected\n";
    return 1;
  }
  return 0;
}

int cmd_bench_collector(const std::vector<std::size_t>& items, const std::vector<std::size_t>& hops,
                        double duration_s, const std::string& out_path) {
  auto cells = bench::run_capacity_bench(items, hops, duration_s);
  if (out_path.empty()) {
    bench::write_capacity_csv(cells, std::cout);
  } else {
    auto out = open_out(out_path);
    bench::write_capacity_csv(cells, out);
    std::cout << "wrote " << cells.size() << " cells to " << out_path << "\n";
  }
  return 0;
}

int cmd_compare(const RunFlags& flags, const std::vector<uint32_t>& thresholds,
                const std::string& out_path) {
  auto outcome =
      bench::compare_algorithms(flags.preset, thresholds, flags.alpha, flags.packets, flags.seed);
  if (out_path.empty()) {
    bench::write_compare_csv(outcome, std::cout);
  } else {
    auto out = open_out(out_path);
    bench::write_compare_csv(outcome, out);
  }
  std::cout << "moving average emitted no more events than per-flow at "
            << outcome.ma_not_above_fraction * 100 << "% of thresholds\n";
  return 0;
}

int cmd_collect(const std::string& input, const std::string& sink_spec, double duration_s,
                uint64_t stats_interval_s, const RunFlags& flags) {
  std::unique_ptr<collector::StreamSink> sink;
  if (sink_spec == "mem") {
    sink = std::make_unique<collector::MemorySink>();
  } else if (sink_spec.rfind("file:", 0) == 0) {
    sink = std::make_unique<collector::FileSink>(sink_spec.substr(5));
  } else {
    throw CLI::ValidationError("--sink must be mem or file:<path>");
  }

  collector::CollectorOptions options;
  options.on_second = [&](const collector::SecondStat& s) {
    if (stats_interval_s != 0 && s.second % stats_interval_s == 0) {
      std::cout << s.second << ", " << s.parsed << ", " << s.parse_errors << ", " << s.forwarded
                << "\n";
    }
  };
  collector::Collector instance(options);

  if (input == "channel") {
    // in-process: preset traffic through a sink pipeline into the collector
    auto records = load_records(flags);
    controlplane::Controller controller;
    uint32_t switch_id = configure_sink(controller, flags);
    dataplane::SwitchPipeline pipeline(switch_id, controller);
    collector::MemoryFrameSource frames;
    uint64_t span = traffic::trace_span_ns(records);
    traffic::replay(records, span * flags.loops,
                    [&](const traffic::TraceRecord& record, uint64_t ts) {
                      auto pkt = bench::packet_from_record(record, ts);
                      dataplane::LocalTelemetry local;
                      local.switch_id = switch_id;
                      local.ingress_ts_ns = ts;
                      local.egress_ts_ns = ts + 500;
                      auto out = pipeline.process(std::move(pkt), local);
                      if (out.report) {
                        auto encoded = wire::encode_report(*out.report);
                        if (encoded.ok()) frames.push(std::move(encoded).value());
                      }
                    });
    auto stats = instance.collect(frames, *sink);
    std::cout << "parsed " << stats.parsed << ", forwarded " << stats.forwarded << ", errors "
              << stats.parse_errors << ", dropped " << stats.dropped << "\n";
    return 0;
  }

  if (input.rfind("udp:", 0) == 0) {
    uint16_t port = static_cast<uint16_t>(std::stoul(input.substr(4)));
    collector::UdpFrameSource source(port);
    std::cout << "listening on udp port " << source.port() << " for " << duration_s << " s\n";
    std::thread stopper([&] {
      std::this_thread::sleep_for(std::chrono::duration<double>(duration_s));
      source.stop();
    });
    auto stats = instance.collect(source, *sink);
    stopper.join();
    std::cout << "parsed " << stats.parsed << ", forwarded " << stats.forwarded << ", errors "
              << stats.parse_errors << ", dropped " << stats.dropped << "\n";
    return 0;
  }

  throw CLI::ValidationError("--in must be channel or udp:<port>");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"INT event pre-filtering pipeline: traffic synthesis, switch emulation, "
               "report collection and evaluation benches"};
  app.require_subcommand(1);

  RunFlags flags;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic microburst trace");
  int gen_hops = 1;
  std::string gen_out = "trace.jsonl";
  std::string gen_params;
  gen->add_option("--preset", flags.preset, "web|cache|hadoop")->capture_default_str();
  gen->add_option("--packets", flags.packets)->capture_default_str();
  gen->add_option("--seed", flags.seed)->capture_default_str();
  gen->add_option("--hops", gen_hops, "hops per record")->capture_default_str();
  gen->add_option("--params", gen_params, "JSON file overriding model parameters");
  gen->add_option("--out", gen_out)->capture_default_str();

  auto* run = app.add_subcommand("run", "Replay a trace through an INT sink pipeline");
  run->add_option("--preset", flags.preset)->capture_default_str();
  run->add_option("--trace", flags.trace_path, "trace file instead of a preset");
  run->add_option("--config", flags.config_path, "switch config document");
  run->add_option("--switch", flags.switch_id, "configured switch id to drive");
  run->add_option("--packets", flags.packets)->capture_default_str();
  run->add_option("--loops", flags.loops)->capture_default_str();
  run->add_option("--seed", flags.seed)->capture_default_str();
  run->add_option("--algorithm", flags.algorithm, "per_hop|per_flow|moving_average|noop|complex")
      ->capture_default_str();
  run->add_option("--threshold", flags.threshold, "microseconds")->capture_default_str();
  run->add_option("--alpha", flags.alpha, "EWMA numerator over 256")->capture_default_str();
  run->add_option("--expr-index", flags.expr_index, "expression register for complex");

  auto* sweep = app.add_subcommand("sweep", "Threshold sweep over presets and algorithms");
  bench::SweepSpec spec;
  spec.base_capacity = 0;  // 0: measure locally before the sweep
  std::vector<std::string> algorithm_names{"per_flow"};
  std::string sweep_out;
  sweep->add_option("--presets", spec.presets, "subset of web,cache,hadoop")
      ->delimiter(',')->capture_default_str();
  sweep->add_option("--algorithms", algorithm_names, "per_hop,per_flow,moving_average,noop")
      ->delimiter(',')->capture_default_str();
  sweep->add_option("--thresholds", spec.thresholds_us, "ascending, microseconds")
      ->delimiter(',');
  sweep->add_option("--packets", spec.packets)->capture_default_str();
  sweep->add_option("--loops", spec.loops, "whole-trace repetitions per cell")
      ->capture_default_str();
  sweep->add_option("--duration-s", spec.duration_s,
                    "replay window in trace time; overrides --loops when positive");
  sweep->add_option("--seed", spec.seed)->capture_default_str();
  sweep->add_option("--base-capacity", spec.base_capacity,
                    "reports/s for capacity projection; when omitted, the local parse "
                    "capacity of the sweep's report shape is measured (not reproducible "
                    "run to run)");
  sweep->add_option("--alpha", spec.alpha_num)->capture_default_str();
  sweep->add_option("--config", flags.config_path,
                    "accepted for parity; sweep cells install their own sink rules");
  sweep->add_option("--parallel", spec.parallel, "worker threads for independent cells")
      ->capture_default_str();
  sweep->add_option("--out", sweep_out, "CSV path (stdout when omitted)");

  auto* bench_cmd = app.add_subcommand("bench-collector", "Report parse capacity grid");
  std::vector<std::size_t> items{1, 4, 8};
  std::vector<std::size_t> hops{1, 2, 4};
  double duration_s = 1.0;
  std::string bench_out;
  bench_cmd->add_option("--items", items)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--hops", hops)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--duration-s", duration_s, "per cell")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "CSV path (stdout when omitted)");

  auto* compare = app.add_subcommand("compare", "Per-flow vs moving average on one trace");
  std::vector<uint32_t> cmp_thresholds{0, 25, 50, 75, 100, 125, 150, 175, 200};
  std::string cmp_out;
  compare->add_option("--preset", flags.preset)->capture_default_str();
  compare->add_option("--thresholds", cmp_thresholds)->delimiter(',');
  compare->add_option("--alpha", flags.alpha)->capture_default_str();
  compare->add_option("--packets", flags.packets)->capture_default_str();
  compare->add_option("--seed", flags.seed)->capture_default_str();
  compare->add_option("--out", cmp_out, "CSV path (stdout when omitted)");

  auto* collect = app.add_subcommand("collect", "Run a collector instance");
  std::string collect_in = "channel";
  std::string collect_sink = "mem";
  double collect_duration = 10.0;
  uint64_t stats_interval = 1;
  collect->add_option("--in", collect_in, "channel or udp:<port>")->capture_default_str();
  collect->add_option("--sink", collect_sink, "mem or file:<path>")->capture_default_str();
  collect->add_option("--duration-s", collect_duration, "udp listen window")
      ->capture_default_str();
  collect->add_option("--stats-interval", stats_interval, "seconds between stat lines")
      ->capture_default_str();
  collect->add_option("--preset", flags.preset)->capture_default_str();
  collect->add_option("--packets", flags.packets)->capture_default_str();
  collect->add_option("--loops", flags.loops)->capture_default_str();
  collect->add_option("--seed", flags.seed)->capture_default_str();
  collect->add_option("--config", flags.config_path);
  collect->add_option("--algorithm", flags.algorithm)->capture_default_str();
  collect->add_option("--threshold", flags.threshold)->capture_default_str();
  collect->add_option("--alpha", flags.alpha)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(flags, gen_hops, gen_params, gen_out);
    if (run->parsed()) return cmd_run(flags);
    if (sweep->parsed()) {
      spec.algorithms.clear();
      for (const auto& name : algorithm_names) spec.algorithms.push_back(parse_algorithm(name));
      if (spec.base_capacity <= 0) {
        // sweep reports carry the trace hop plus the sink's own hop
        spec.base_capacity =
            collector::bench_parse(wire::InstructionBitmask(0xB0), 2, 0.6);
        std::cout << "measured base capacity: " << spec.base_capacity << " reports/s\n";
      }
      return cmd_sweep(spec, sweep_out);
    }
    if (bench_cmd->parsed()) return cmd_bench_collector(items, hops, duration_s, bench_out);
    if (compare->parsed()) return cmd_compare(flags, cmp_thresholds, cmp_out);
    if (collect->parsed()) {
      return cmd_collect(collect_in, collect_sink, collect_duration, stats_interval, flags);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
