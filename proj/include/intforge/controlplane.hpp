#ifndef INTFORGE_CONTROLPLANE_HPP
#define INTFORGE_CONTROLPLANE_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "intforge/detection.hpp"
#include "intforge/wire.hpp"

namespace intforge::controlplane {

using wire::FlowKey;
using wire::InstructionBitmask;

enum class SwitchRole : uint8_t { kSource, kTransit, kSink, kOff };

const char* role_name(SwitchRole role);
std::optional<SwitchRole> role_from_name(const std::string& name);

// Per-field exact-or-any match on the 5-tuple.
struct FlowMatch {
  std::optional<uint32_t> src_ip;
  std::optional<uint32_t> dst_ip;
  std::optional<uint16_t> src_port;
  std::optional<uint16_t> dst_port;
  std::optional<uint8_t> proto;

  bool matches(const FlowKey& key) const;
  int specificity() const;  // non-wildcard field count

  friend bool operator==(const FlowMatch&, const FlowMatch&) = default;
};

struct FlowConfig {
  FlowMatch match;
  SwitchRole role = SwitchRole::kOff;
  InstructionBitmask mask;
  detection::AlgorithmConfig algorithm;
  int priority = 0;

  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

struct ForwardingEntry {
  uint32_t prefix = 0;
  uint8_t prefix_len = 0;
  uint16_t port = 0;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Ordered rule set. Resolution picks the highest priority among matching
// rules; ties go to the more specific match, then to installation order, so
// lookup is a pure function of the rule set and the key.
class FlowTable {
 public:
  void install(const FlowConfig& cfg);  // throws ConfigError
  const FlowConfig* resolve(const FlowKey& key) const;
  std::size_t size() const { return rules_.size(); }

 private:
  std::vector<FlowConfig> rules_;
};

void validate_flow_config(const FlowConfig& cfg);  // throws ConfigError

// One switch's control state, published to pipelines as an immutable snapshot.
struct SwitchState {
  uint32_t switch_id = 0;
  uint8_t max_hops = 8;
  FlowTable flows;
  std::vector<ForwardingEntry> forwarding;
  std::optional<uint16_t> default_port;
  std::map<std::size_t, detection::CnfExpression> expressions;
};

struct ConfigDocument {
  std::vector<SwitchState> switches;
};

// expr     := or_expr
// or_expr  := and_expr ( "or" and_expr )*        -- "and" binds tighter
// and_expr := primary ( "and" primary )*
// primary  := literal | "(" or_expr ")"
// literal  := IDENT CMP UINT, CMP in { < > <= >= == != }
// Output is normalized to CNF and bounded by kMaxClauses/kMaxLiterals.
detection::CnfExpression compile_expression(const std::string& text);  // throws ConfigError

// Parses and fully validates a config document; throws ConfigError with
// per-field diagnostics and applies nothing on failure.
ConfigDocument parse_config(const std::string& json_text);
ConfigDocument load_config_file(const std::string& path);

// The SDN-controller stand-in: owns switch state, applies documents
// atomically, publishes snapshots that pipelines pick up between packets.
class Controller {
 public:
  void install_flow(uint32_t switch_id, const FlowConfig& cfg);
  void install_expression(uint32_t switch_id, std::size_t index,
                          const detection::CnfExpression& expr);
  void install_forwarding(uint32_t switch_id, const ForwardingEntry& entry);
  void set_default_port(uint32_t switch_id, uint16_t port);
  void set_max_hops(uint32_t switch_id, uint8_t max_hops);

  // All-or-nothing: replaces the running configuration of every switch named
  // in the document, leaves everything untouched on any error.
  void apply(const ConfigDocument& doc);
  void load_config(const std::string& path);

  std::shared_ptr<const SwitchState> snapshot(uint32_t switch_id) const;
  std::pair<std::shared_ptr<const SwitchState>, uint64_t> snapshot_versioned(
      uint32_t switch_id) const;
  uint64_t version() const;

 private:
  std::shared_ptr<SwitchState> mutable_state(uint32_t switch_id);

  mutable std::mutex mu_;
  std::map<uint32_t, std::shared_ptr<const SwitchState>> switches_;
  uint64_t version_ = 0;
};

}  // namespace intforge::controlplane

#endif  // INTFORGE_CONTROLPLANE_HPP
