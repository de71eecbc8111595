#include <doctest.h>

#include <random>

#include "intforge/wire.hpp"
#include "test_util.hpp"

using namespace intforge::wire;

namespace {

TelemetryReport minimal_report() {
  TelemetryReport report;
  report.version = 1;
  report.hw_id = 5;
  report.seq_no = 16;
  report.sink_node_id = 42;
  report.report_ts = 1000000;
  report.flow_key = {0x0A000001, 0x0A000101, 40000, 80, 17};
  report.mask = InstructionBitmask(0x80);
  report.max_hops = 8;
  HopMetadata hop;
  hop.set(MetadataSlot::kSwitchId, 7);
  report.hops.push_back(hop);
  return report;
}

}  // namespace

TEST_CASE("instruction mask item count is popcount") {
  CHECK(InstructionBitmask(0x00).item_count() == 0);
  CHECK(InstructionBitmask(0xFF).item_count() == 8);
  CHECK(InstructionBitmask(0xB0).item_count() == 3);
  InstructionBitmask m;
  m.set(MetadataSlot::kQueueOccupancy);
  CHECK(m.bits() == 0x10);
  CHECK(m.has(MetadataSlot::kQueueOccupancy));
  CHECK_FALSE(m.has(MetadataSlot::kSwitchId));
}

TEST_CASE("switch_id-only report ends with the switch id word") {
  auto encoded = encode_report(minimal_report());
  REQUIRE(encoded.ok());
  const auto& bytes = encoded.value();
  REQUIRE(bytes.size() == kReportFixedSize + 4);
  CHECK(bytes[bytes.size() - 4] == 0x00);
  CHECK(bytes[bytes.size() - 3] == 0x00);
  CHECK(bytes[bytes.size() - 2] == 0x00);
  CHECK(bytes[bytes.size() - 1] == 0x07);

  auto decoded = decode_report(bytes);
  REQUIRE(decoded.ok());
  CHECK(decoded.value() == minimal_report());
}

TEST_CASE("full mask with four hops yields a 128 byte stack section") {
  std::mt19937_64 rng(7);
  TelemetryReport report = testutil::random_report(rng);
  report.mask = InstructionBitmask(0xFF);
  report.hops.clear();
  for (int h = 0; h < 4; ++h) report.hops.push_back(testutil::random_hop(report.mask, rng));
  auto encoded = encode_report(report);
  REQUIRE(encoded.ok());
  CHECK(encoded.value().size() == kReportFixedSize + 4 * 8 * 4);
}

TEST_CASE("report round-trips over randomized inputs") {
  std::mt19937_64 rng(0xC0FFEE);
  for (int i = 0; i < 1000; ++i) {
    TelemetryReport report = testutil::random_report(rng);
    auto encoded = encode_report(report);
    REQUIRE(encoded.ok());
    auto decoded = decode_report(encoded.value());
    REQUIRE(decoded.ok());
    CHECK(decoded.value() == report);
  }
}

TEST_CASE("encoded size follows the length law for every mask and hop count") {
  std::mt19937_64 rng(99);
  for (int mask_bits = 0; mask_bits < 256; ++mask_bits) {
    InstructionBitmask mask(static_cast<uint8_t>(mask_bits));
    for (int hops = 0; hops <= 8; ++hops) {
      TelemetryReport report;
      report.version = 1;
      report.mask = mask;
      report.max_hops = 8;
      for (int h = 0; h < hops; ++h) report.hops.push_back(testutil::random_hop(mask, rng));
      auto encoded = encode_report(report);
      REQUIRE(encoded.ok());
      CHECK(encoded.value().size() ==
            kReportFixedSize + static_cast<std::size_t>(hops) * mask.item_count() * 4);
    }
  }
}

TEST_CASE("decode rejects malformed buffers") {
  SUBCASE("empty buffer is truncated") {
    auto r = decode_report({});
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kTruncated);
  }
  SUBCASE("bad version") {
    auto encoded = encode_report(minimal_report()).value();
    encoded[0] = static_cast<uint8_t>((encoded[0] & 0x0F) | (2 << 4));  // version 2
    auto r = decode_report(encoded);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kBadVersion);
  }
  SUBCASE("declared hops exceed available stack bytes") {
    auto encoded = encode_report(minimal_report()).value();
    encoded[15] = 2;  // hop_count 2, stack bytes for one hop
    auto r = decode_report(encoded);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kLengthMismatch);
  }
  SUBCASE("trailing garbage is a length mismatch") {
    auto encoded = encode_report(minimal_report()).value();
    encoded.push_back(0);
    auto r = decode_report(encoded);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kLengthMismatch);
  }
  SUBCASE("any truncation of a valid report fails") {
    auto encoded = encode_report(minimal_report()).value();
    for (std::size_t cut = 0; cut < encoded.size(); ++cut) {
      std::span<const uint8_t> prefix(encoded.data(), cut);
      CHECK_FALSE(decode_report(prefix).ok());
    }
  }
}

TEST_CASE("encode rejects invariant violations") {
  SUBCASE("hop_count above max_hops") {
    auto report = minimal_report();
    report.max_hops = 1;
    report.hops.push_back(report.hops.front());
    auto r = encode_report(report);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kStackOverflow);
  }
  SUBCASE("value present without mask bit") {
    auto report = minimal_report();
    report.hops.front().set(MetadataSlot::kQueueOccupancy, 9);
    auto r = encode_report(report);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kMaskMismatch);
  }
  SUBCASE("masked value missing from a hop") {
    auto report = minimal_report();
    report.hops.front() = HopMetadata{};
    auto r = encode_report(report);
    REQUIRE_FALSE(r.ok());
    CHECK(r.error().kind == WireError::Kind::kMaskMismatch);
  }
}

TEST_CASE("push_hop prepends newest first and respects max_hops") {
  IntHeaderStack stack;
  stack.mask = InstructionBitmask(0x80);
  stack.max_hops = 4;

  for (uint32_t id = 1; id <= 4; ++id) {
    HopMetadata hop;
    hop.set(MetadataSlot::kSwitchId, id);
    CHECK(push_hop(stack, hop) == PushStatus::kOk);
    CHECK(stack.hop_count() == id);
  }
  // newest first
  for (uint32_t i = 0; i < 4; ++i) {
    CHECK(stack.hops[i].get(MetadataSlot::kSwitchId) == 4 - i);
  }

  HopMetadata extra;
  extra.set(MetadataSlot::kSwitchId, 5);
  IntHeaderStack before = stack;
  CHECK(push_hop(stack, extra) == PushStatus::kOverflow);
  CHECK(stack == before);

  HopMetadata wrong;
  wrong.set(MetadataSlot::kQueueOccupancy, 1);
  IntHeaderStack small;
  small.mask = InstructionBitmask(0x80);
  CHECK(push_hop(small, wrong) == PushStatus::kMaskMismatch);
  CHECK(small.hop_count() == 0);
}

TEST_CASE("push order survives an encode/decode cycle") {
  IntHeaderStack stack;
  stack.mask = InstructionBitmask(0xA0);  // switch_id | hop_latency
  stack.max_hops = 8;
  for (uint32_t id = 10; id < 14; ++id) {
    HopMetadata hop;
    hop.set(MetadataSlot::kSwitchId, id);
    hop.set(MetadataSlot::kHopLatency, id * 100);
    REQUIRE(push_hop(stack, hop) == PushStatus::kOk);
  }
  auto encoded = encode_header_stack(stack);
  REQUIRE(encoded.ok());
  auto decoded = decode_header_stack(encoded.value());
  REQUIRE(decoded.ok());
  CHECK(decoded.value() == stack);
  CHECK(decoded.value().hops.front().get(MetadataSlot::kSwitchId) == 13);
  CHECK(decoded.value().hops.back().get(MetadataSlot::kSwitchId) == 10);
}

TEST_CASE("header stack decode validates shim and length_words") {
  IntHeaderStack stack;
  stack.mask = InstructionBitmask(0xB0);
  stack.max_hops = 8;
  HopMetadata hop;
  hop.set(MetadataSlot::kSwitchId, 1);
  hop.set(MetadataSlot::kHopLatency, 5000);
  hop.set(MetadataSlot::kQueueOccupancy, 42);
  REQUIRE(push_hop(stack, hop) == PushStatus::kOk);
  auto encoded = encode_header_stack(stack).value();

  SUBCASE("valid buffer round-trips") {
    auto decoded = decode_header_stack(encoded);
    REQUIRE(decoded.ok());
    CHECK(decoded.value() == stack);
  }
  SUBCASE("wrong shim type") {
    auto bad = encoded;
    bad[0] = 0x02;
    CHECK(decode_header_stack(bad).error().kind == WireError::Kind::kBadShimType);
  }
  SUBCASE("length_words disagrees with hop_count * items") {
    auto bad = encoded;
    bad[1] = 5;
    CHECK(decode_header_stack(bad).error().kind == WireError::Kind::kLengthMismatch);
  }
}

TEST_CASE("reserved fields are carried, not validated") {
  auto report = minimal_report();
  report.pad6 = 0x2A;
  report.md_reserved = 0xEE;
  auto decoded = decode_report(encode_report(report).value());
  REQUIRE(decoded.ok());
  CHECK(decoded.value().pad6 == 0x2A);
  CHECK(decoded.value().md_reserved == 0xEE);

  IntHeaderStack stack;
  stack.mask = InstructionBitmask(0x80);
  stack.shim_reserved = 0xBEEF;
  stack.md_reserved = 0x77;
  HopMetadata hop;
  hop.set(MetadataSlot::kSwitchId, 3);
  push_hop(stack, hop);
  auto ds = decode_header_stack(encode_header_stack(stack).value());
  REQUIRE(ds.ok());
  CHECK(ds.value().shim_reserved == 0xBEEF);
  CHECK(ds.value().md_reserved == 0x77);
}

TEST_CASE("flow key encodes big-endian in 13 bytes") {
  FlowKey key{0xC0A80102, 0x0A010203, 1234, 4321, 6};
  auto bytes = encode_flow_key(key);
  CHECK(bytes[0] == 0xC0);
  CHECK(bytes[3] == 0x02);
  CHECK(bytes[8] == 0x04);
  CHECK(bytes[9] == 0xD2);
  CHECK(bytes[12] == 6);
  CHECK(decode_flow_key(bytes) == key);
}

TEST_CASE("golden report vectors decode to the expected reports") {
  SUBCASE("switch_id only") {
    auto bytes = testutil::read_hex_file(std::string(TESTDATA_DIR) + "/report_switch_id_only.hex");
    auto decoded = decode_report(bytes);
    REQUIRE(decoded.ok());
    CHECK(decoded.value() == minimal_report());
    CHECK(encode_report(minimal_report()).value() == bytes);
  }
  SUBCASE("two hops, latency and occupancy") {
    auto bytes = testutil::read_hex_file(std::string(TESTDATA_DIR) + "/report_two_hops.hex");
    auto decoded = decode_report(bytes);
    REQUIRE(decoded.ok());
    const auto& r = decoded.value();
    CHECK(r.hw_id == 0);
    CHECK(r.pad6 == 3);
    CHECK(r.seq_no == 1);
    CHECK(r.sink_node_id == 7);
    CHECK(r.flow_key == FlowKey{0xC0A80102, 0x0A010203, 1234, 4321, 6});
    CHECK(r.mask.bits() == 0x30);
    CHECK(r.max_hops == 4);
    CHECK(r.md_reserved == 0xAB);
    REQUIRE(r.hops.size() == 2);
    CHECK(r.hops[0].get(MetadataSlot::kHopLatency) == 1000);
    CHECK(r.hops[0].get(MetadataSlot::kQueueOccupancy) == 150);
    CHECK(r.hops[1].get(MetadataSlot::kHopLatency) == 2000);
    CHECK(r.hops[1].get(MetadataSlot::kQueueOccupancy) == 75);
    CHECK(encode_report(r).value() == bytes);
  }
  SUBCASE("on-packet header stack") {
    auto bytes =
        testutil::read_hex_file(std::string(TESTDATA_DIR) + "/header_stack_three_items.hex");
    auto decoded = decode_header_stack(bytes);
    REQUIRE(decoded.ok());
    const auto& s = decoded.value();
    CHECK(s.mask.bits() == 0xB0);
    CHECK(s.hop_count() == 1);
    CHECK(s.length_words() == 3);
    CHECK(s.hops[0].get(MetadataSlot::kSwitchId) == 1);
    CHECK(s.hops[0].get(MetadataSlot::kHopLatency) == 5000);
    CHECK(s.hops[0].get(MetadataSlot::kQueueOccupancy) == 42);
    CHECK(encode_header_stack(s).value() == bytes);
  }
}

TEST_CASE("slot names round-trip") {
  for (std::size_t i = 0; i < kSlotCount; ++i) {
    auto slot = static_cast<MetadataSlot>(i);
    auto back = slot_from_name(slot_name(slot));
    REQUIRE(back.has_value());
    CHECK(*back == slot);
  }
  CHECK_FALSE(slot_from_name("not_a_slot").has_value());
}
