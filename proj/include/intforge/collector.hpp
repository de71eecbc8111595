#ifndef INTFORGE_COLLECTOR_HPP
#define INTFORGE_COLLECTOR_HPP

#include <array>
#include <atomic>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "intforge/wire.hpp"

namespace intforge::collector {

// Pull interface over report frames. One frame is one telemetry report
// candidate; nullopt ends the stream.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<std::vector<uint8_t>> next() = 0;
};

class MemoryFrameSource : public FrameSource {
 public:
  MemoryFrameSource() = default;
  explicit MemoryFrameSource(std::vector<std::vector<uint8_t>> frames);
  void push(std::vector<uint8_t> frame) { frames_.push_back(std::move(frame)); }
  std::optional<std::vector<uint8_t>> next() override;

 private:
  std::deque<std::vector<uint8_t>> frames_;
};

// Blocking UDP ingest; each datagram is one report frame. next() returns
// nullopt once stop() was requested and the socket went idle.
class UdpFrameSource : public FrameSource {
 public:
  explicit UdpFrameSource(uint16_t port);  // 0 picks an ephemeral port
  ~UdpFrameSource() override;
  UdpFrameSource(const UdpFrameSource&) = delete;
  UdpFrameSource& operator=(const UdpFrameSource&) = delete;

  uint16_t port() const { return port_; }
  void stop() { stop_.store(true); }
  std::optional<std::vector<uint8_t>> next() override;

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
};

struct ParsedEvent {
  wire::TelemetryReport report;
  uint64_t receive_ts_ns = 0;
  uint32_t collector_id = 0;

  friend bool operator==(const ParsedEvent&, const ParsedEvent&) = default;
};

struct SinkMessage {
  std::string topic;
  std::array<uint8_t, wire::kFlowKeyWireSize> key{};  // encoded flow key
  std::string value;                                  // JSON ParsedEvent
};

std::string parsed_event_to_json(const ParsedEvent& event);
ParsedEvent parsed_event_from_json(const std::string& text);  // throws std::runtime_error

enum class PublishStatus { kAccepted, kFull };

class StreamSink {
 public:
  virtual ~StreamSink() = default;
  virtual PublishStatus publish(const SinkMessage& message) = 0;
};

// Buffering sink; unbounded unless a capacity is set. Thread-safe so a
// draining consumer can run beside the producing collector instance.
class MemorySink : public StreamSink {
 public:
  MemorySink() = default;
  explicit MemorySink(std::size_t capacity) : capacity_(capacity) {}

  PublishStatus publish(const SinkMessage& message) override;
  std::vector<SinkMessage> drain();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::deque<SinkMessage> messages_;
  std::optional<std::size_t> capacity_;
};

// Appends one JSON line per message.
class FileSink : public StreamSink {
 public:
  explicit FileSink(const std::string& path);  // throws on open failure
  PublishStatus publish(const SinkMessage& message) override;

 private:
  std::string path_;
  // kept simple: reopen-append free, single producer
  std::unique_ptr<std::ofstream> out_;
};

enum class BackpressurePolicy { kBlock, kDrop };

struct SecondStat {
  uint64_t second = 0;  // offset from collect() start
  uint64_t parsed = 0;
  uint64_t parse_errors = 0;
  uint64_t forwarded = 0;
  uint64_t dropped = 0;
};

struct CollectorStats {
  uint64_t parsed = 0;  // frames consumed
  uint64_t parse_errors = 0;
  uint64_t forwarded = 0;
  uint64_t dropped = 0;  // backpressure drops
  double elapsed_s = 0.0;
  std::vector<SecondStat> per_second;
};

struct CollectorOptions {
  std::string topic = "int-events";
  uint32_t instance_id = 0;
  BackpressurePolicy backpressure = BackpressurePolicy::kBlock;
  std::function<void(const SecondStat&)> on_second;  // called at each 1 s boundary
};

// One instance is single-threaded over its own source and sink; instances
// share nothing and scale by running more of them.
class Collector {
 public:
  explicit Collector(CollectorOptions options = {});
  CollectorStats collect(FrameSource& input, StreamSink& sink);

 private:
  CollectorOptions options_;
};

// Parse-rate micro benchmark over pre-encoded in-memory reports; generation
// cost is excluded, as is a warmup fraction of the duration.
double bench_parse(wire::InstructionBitmask mask, std::size_t hop_count, double duration_s);

// Deterministic synthetic report for benches and tests.
wire::TelemetryReport make_synthetic_report(wire::InstructionBitmask mask, std::size_t hop_count,
                                            uint64_t salt);

}  // namespace intforge::collector

#endif  // INTFORGE_COLLECTOR_HPP
