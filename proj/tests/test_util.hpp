#ifndef INTFORGE_TEST_UTIL_HPP
#define INTFORGE_TEST_UTIL_HPP

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "intforge/wire.hpp"

namespace testutil {

// Hex-dump files: whitespace separated byte pairs, '#' starts a comment.
inline std::vector<uint8_t> read_hex_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open hex file " + path);
  std::vector<uint8_t> bytes;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      bytes.push_back(static_cast<uint8_t>(std::stoul(tok, nullptr, 16)));
    }
  }
  return bytes;
}

inline intforge::wire::HopMetadata random_hop(intforge::wire::InstructionBitmask mask,
                                              std::mt19937_64& rng) {
  intforge::wire::HopMetadata hop;
  std::uniform_int_distribution<uint32_t> value;
  for (std::size_t i = 0; i < intforge::wire::kSlotCount; ++i) {
    auto slot = static_cast<intforge::wire::MetadataSlot>(i);
    if (mask.has(slot)) hop.set(slot, value(rng));
  }
  return hop;
}

inline intforge::wire::TelemetryReport random_report(std::mt19937_64& rng) {
  using namespace intforge::wire;
  std::uniform_int_distribution<uint32_t> value;
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> six_bits(0, 63);

  TelemetryReport report;
  report.version = 1;
  report.hw_id = static_cast<uint8_t>(six_bits(rng));
  report.pad6 = static_cast<uint8_t>(six_bits(rng));
  report.seq_no = value(rng);
  report.sink_node_id = value(rng);
  report.report_ts = value(rng);
  report.flow_key = {value(rng), value(rng), static_cast<uint16_t>(value(rng)),
                     static_cast<uint16_t>(value(rng)), static_cast<uint8_t>(byte(rng))};
  report.mask = InstructionBitmask(static_cast<uint8_t>(byte(rng)));
  std::uniform_int_distribution<int> hops(0, 8);
  int hop_count = hops(rng);
  report.max_hops = static_cast<uint8_t>(std::max(8, hop_count));
  report.md_reserved = static_cast<uint8_t>(byte(rng));
  for (int h = 0; h < hop_count; ++h) report.hops.push_back(random_hop(report.mask, rng));
  return report;
}

}  // namespace testutil

#endif  // INTFORGE_TEST_UTIL_HPP
