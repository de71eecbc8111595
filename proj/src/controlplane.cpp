#include "intforge/controlplane.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace intforge::controlplane {

using detection::AlgorithmKind;
using detection::Aggregate;
using detection::CnfExpression;
using detection::CnfLiteral;
using detection::Comparator;
using json = nlohmann::json;

const char* role_name(SwitchRole role) {
  switch (role) {
    case SwitchRole::kSource: return "source";
    case SwitchRole::kTransit: return "transit";
    case SwitchRole::kSink: return "sink";
    case SwitchRole::kOff: return "off";
  }
  return "unknown";
}

std::optional<SwitchRole> role_from_name(const std::string& name) {
  if (name == "source") return SwitchRole::kSource;
  if (name == "transit") return SwitchRole::kTransit;
  if (name == "sink") return SwitchRole::kSink;
  if (name == "off") return SwitchRole::kOff;
  return std::nullopt;
}

bool FlowMatch::matches(const FlowKey& key) const {
  if (src_ip && *src_ip != key.src_ip) return false;
  if (dst_ip && *dst_ip != key.dst_ip) return false;
  if (src_port && *src_port != key.src_port) return false;
  if (dst_port && *dst_port != key.dst_port) return false;
  if (proto && *proto != key.proto) return false;
  return true;
}

int FlowMatch::specificity() const {
  return static_cast<int>(src_ip.has_value()) + static_cast<int>(dst_ip.has_value()) +
         static_cast<int>(src_port.has_value()) + static_cast<int>(dst_port.has_value()) +
         static_cast<int>(proto.has_value());
}

void validate_flow_config(const FlowConfig& cfg) {
  const auto& alg = cfg.algorithm;
  if (alg.alpha_num > 256) {
    throw ConfigError("alpha_num " + std::to_string(alg.alpha_num) + " exceeds 256");
  }
  if (cfg.role == SwitchRole::kSource && cfg.mask.bits() == 0) {
    throw ConfigError("source rule with empty instruction mask");
  }
  bool fast = alg.kind == AlgorithmKind::kPerHop || alg.kind == AlgorithmKind::kPerFlow ||
              alg.kind == AlgorithmKind::kMovingAverage;
  if (fast && cfg.mask.bits() != 0 && !cfg.mask.has(alg.metadata_type)) {
    throw ConfigError(std::string("algorithm observes ") + wire::slot_name(alg.metadata_type) +
                      " but the instruction mask does not include it");
  }
}

void FlowTable::install(const FlowConfig& cfg) {
  validate_flow_config(cfg);
  for (const auto& rule : rules_) {
    if (rule.match == cfg.match && rule.priority == cfg.priority) {
      throw ConfigError("duplicate rule (same match and priority " +
                        std::to_string(cfg.priority) + ")");
    }
  }
  rules_.push_back(cfg);
}

const FlowConfig* FlowTable::resolve(const FlowKey& key) const {
  const FlowConfig* best = nullptr;
  for (const auto& rule : rules_) {
    if (!rule.match.matches(key)) continue;
    if (!best || rule.priority > best->priority ||
        (rule.priority == best->priority &&
         rule.match.specificity() > best->match.specificity())) {
      best = &rule;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Expression compiler
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { kIdent, kNumber, kCmp, kAnd, kOr, kLParen, kRParen, kEnd };
  Kind kind;
  std::string text;
  Comparator cmp = Comparator::kGt;
  uint32_t number = 0;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::size_t start = pos_;
    if (pos_ >= text_.size()) return {Token::Kind::kEnd, "", Comparator::kGt, 0, start};
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '-') {
          ++pos_;
        } else {
          break;
        }
      }
      std::string word = text_.substr(start, pos_ - start);
      if (word == "and") return {Token::Kind::kAnd, word, Comparator::kGt, 0, start};
      if (word == "or") return {Token::Kind::kOr, word, Comparator::kGt, 0, start};
      return {Token::Kind::kIdent, word, Comparator::kGt, 0, start};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      uint64_t value = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        value = value * 10 + (text_[pos_] - '0');
        if (value > 0xFFFFFFFFull) {
          throw ConfigError("malformed number at offset " + std::to_string(start) +
                            ": exceeds 32 bits");
        }
        ++pos_;
      }
      if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) ||
                                  text_[pos_] == '_' || text_[pos_] == '.')) {
        throw ConfigError("malformed number at offset " + std::to_string(start));
      }
      return {Token::Kind::kNumber, text_.substr(start, pos_ - start), Comparator::kGt,
              static_cast<uint32_t>(value), start};
    }
    if (c == '(') { ++pos_; return {Token::Kind::kLParen, "(", Comparator::kGt, 0, start}; }
    if (c == ')') { ++pos_; return {Token::Kind::kRParen, ")", Comparator::kGt, 0, start}; }
    auto two = text_.substr(pos_, 2);
    if (two == "<=") { pos_ += 2; return {Token::Kind::kCmp, two, Comparator::kLe, 0, start}; }
    if (two == ">=") { pos_ += 2; return {Token::Kind::kCmp, two, Comparator::kGe, 0, start}; }
    if (two == "==") { pos_ += 2; return {Token::Kind::kCmp, two, Comparator::kEq, 0, start}; }
    if (two == "!=") { pos_ += 2; return {Token::Kind::kCmp, two, Comparator::kNe, 0, start}; }
    if (c == '<') { ++pos_; return {Token::Kind::kCmp, "<", Comparator::kLt, 0, start}; }
    if (c == '>') { ++pos_; return {Token::Kind::kCmp, ">", Comparator::kGt, 0, start}; }
    throw ConfigError(std::string("unexpected character '") + c + "' at offset " +
                      std::to_string(start));
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
};

wire::MetadataSlot resolve_identifier(const std::string& raw) {
  std::string name = raw;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::replace(name.begin(), name.end(), '-', '_');
  if (name == "queue_buildup") name = "queue_occupancy";
  if (name == "latency") name = "hop_latency";
  if (auto slot = wire::slot_from_name(name)) return *slot;
  throw ConfigError("unknown identifier '" + raw + "'");
}

struct Ast {
  enum class Op { kLiteral, kAnd, kOr };
  Op op = Op::kLiteral;
  CnfLiteral literal;
  std::unique_ptr<Ast> lhs, rhs;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) { advance(); }

  std::unique_ptr<Ast> parse() {
    auto ast = or_expr();
    expect(Token::Kind::kEnd, "end of expression");
    return ast;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  void expect(Token::Kind kind, const char* what) {
    if (current_.kind != kind) {
      throw ConfigError(std::string("expected ") + what + " at offset " +
                        std::to_string(current_.pos));
    }
  }

  std::unique_ptr<Ast> or_expr() {
    auto lhs = and_expr();
    while (current_.kind == Token::Kind::kOr) {
      advance();
      auto node = std::make_unique<Ast>();
      node->op = Ast::Op::kOr;
      node->lhs = std::move(lhs);
      node->rhs = and_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<Ast> and_expr() {
    auto lhs = primary();
    while (current_.kind == Token::Kind::kAnd) {
      advance();
      auto node = std::make_unique<Ast>();
      node->op = Ast::Op::kAnd;
      node->lhs = std::move(lhs);
      node->rhs = primary();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<Ast> primary() {
    if (current_.kind == Token::Kind::kLParen) {
      advance();
      auto inner = or_expr();
      expect(Token::Kind::kRParen, "')'");
      advance();
      return inner;
    }
    expect(Token::Kind::kIdent, "identifier");
    auto node = std::make_unique<Ast>();
    node->literal.metadata_type = resolve_identifier(current_.text);
    advance();
    expect(Token::Kind::kCmp, "comparison operator");
    node->literal.cmp = current_.cmp;
    advance();
    expect(Token::Kind::kNumber, "number");
    node->literal.constant = current_.number;
    node->literal.aggregate = Aggregate::kSumOverHops;
    advance();
    return node;
  }

  Lexer lexer_;
  Token current_;
};

using ClauseList = std::vector<std::vector<CnfLiteral>>;

// AND concatenates clause lists; OR distributes via the cross product.
ClauseList to_cnf(const Ast& ast) {
  switch (ast.op) {
    case Ast::Op::kLiteral:
      return {{ast.literal}};
    case Ast::Op::kAnd: {
      ClauseList lhs = to_cnf(*ast.lhs);
      ClauseList rhs = to_cnf(*ast.rhs);
      lhs.insert(lhs.end(), rhs.begin(), rhs.end());
      return lhs;
    }
    case Ast::Op::kOr: {
      ClauseList lhs = to_cnf(*ast.lhs);
      ClauseList rhs = to_cnf(*ast.rhs);
      ClauseList out;
      for (const auto& ca : lhs) {
        for (const auto& cb : rhs) {
          std::vector<CnfLiteral> merged = ca;
          merged.insert(merged.end(), cb.begin(), cb.end());
          out.push_back(std::move(merged));
        }
      }
      return out;
    }
  }
  return {};
}

}  // namespace

CnfExpression compile_expression(const std::string& text) {
  Parser parser(text);
  auto ast = parser.parse();
  CnfExpression expr;
  expr.clauses = to_cnf(*ast);
  if (expr.clauses.size() > detection::kMaxClauses) {
    throw ConfigError("expression normalizes to " + std::to_string(expr.clauses.size()) +
                      " clauses, limit is " + std::to_string(detection::kMaxClauses));
  }
  for (const auto& clause : expr.clauses) {
    if (clause.size() > detection::kMaxLiterals) {
      throw ConfigError("clause with " + std::to_string(clause.size()) + " literals, limit is " +
                        std::to_string(detection::kMaxLiterals));
    }
  }
  return expr;
}

// ---------------------------------------------------------------------------
// Config document
// ---------------------------------------------------------------------------

namespace {

std::optional<uint32_t> parse_ip(const std::string& text) {
  uint32_t parts[4];
  int idx = 0;
  std::size_t pos = 0;
  while (idx < 4) {
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
      return std::nullopt;
    }
    uint32_t v = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      v = v * 10 + (text[pos] - '0');
      if (v > 255) return std::nullopt;
      ++pos;
    }
    parts[idx++] = v;
    if (idx < 4) {
      if (pos >= text.size() || text[pos] != '.') return std::nullopt;
      ++pos;
    }
  }
  if (pos != text.size()) return std::nullopt;
  return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

class Diagnostics {
 public:
  void add(const std::string& where, const std::string& what) {
    issues_.push_back(where + ": " + what);
  }
  bool empty() const { return issues_.empty(); }
  std::string join() const {
    std::ostringstream os;
    os << "config rejected (" << issues_.size() << " issue" << (issues_.size() == 1 ? "" : "s")
       << "):";
    for (const auto& issue : issues_) os << "\n  - " << issue;
    return os.str();
  }

 private:
  std::vector<std::string> issues_;
};

template <typename T>
std::optional<T> wildcardable(const json& j, const std::string& where, Diagnostics& diag,
                              uint64_t max) {
  if (j.is_string()) {
    if (j.get<std::string>() == "*") return std::nullopt;
    auto ip = parse_ip(j.get<std::string>());
    if (ip && max == 0xFFFFFFFFull) return static_cast<T>(*ip);
    diag.add(where, "expected number, dotted IPv4 or \"*\"");
    return std::nullopt;
  }
  if (!j.is_number_unsigned() || j.get<uint64_t>() > max) {
    diag.add(where, "expected unsigned number <= " + std::to_string(max) + " or \"*\"");
    return std::nullopt;
  }
  return static_cast<T>(j.get<uint64_t>());
}

InstructionBitmask parse_mask(const json& j, const std::string& where, Diagnostics& diag) {
  InstructionBitmask mask;
  if (j.is_number_unsigned()) {
    if (j.get<uint64_t>() > 0xFF) {
      diag.add(where, "mask value exceeds 8 bits");
      return mask;
    }
    return InstructionBitmask(static_cast<uint8_t>(j.get<uint64_t>()));
  }
  if (!j.is_array()) {
    diag.add(where, "expected item-name array or integer");
    return mask;
  }
  for (const auto& item : j) {
    if (!item.is_string()) {
      diag.add(where, "mask items must be strings");
      continue;
    }
    auto slot = wire::slot_from_name(item.get<std::string>());
    if (!slot) {
      diag.add(where, "unknown telemetry item '" + item.get<std::string>() + "'");
      continue;
    }
    mask.set(*slot);
  }
  return mask;
}

detection::AlgorithmConfig parse_algorithm(const json& j, const std::string& where,
                                           Diagnostics& diag) {
  detection::AlgorithmConfig alg;
  if (!j.is_object()) {
    diag.add(where, "expected object");
    return alg;
  }
  std::string kind = j.value("kind", "");
  std::string canon = kind;
  std::replace(canon.begin(), canon.end(), '-', '_');
  if (canon == "per_hop") alg.kind = AlgorithmKind::kPerHop;
  else if (canon == "per_flow") alg.kind = AlgorithmKind::kPerFlow;
  else if (canon == "moving_average") alg.kind = AlgorithmKind::kMovingAverage;
  else if (canon == "noop") alg.kind = AlgorithmKind::kNoop;
  else if (canon == "complex") alg.kind = AlgorithmKind::kComplex;
  else diag.add(where + ".kind", "unknown algorithm '" + kind + "'");

  if (j.contains("metadata_type")) {
    auto slot = wire::slot_from_name(j["metadata_type"].get<std::string>());
    if (slot) alg.metadata_type = *slot;
    else diag.add(where + ".metadata_type", "unknown telemetry item");
  }
  alg.threshold = j.value("threshold", 0u);
  alg.alpha_num = j.value("alpha_num", 256u);
  alg.expr_index = j.value("expr_index", 0u);
  alg.ewma_always_update = j.value("ewma_always_update", false);
  if (alg.alpha_num > 256) diag.add(where + ".alpha_num", "must be <= 256");
  return alg;
}

}  // namespace

ConfigDocument parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  Diagnostics diag;
  ConfigDocument out;
  if (!doc.is_object() || !doc.contains("switches") || !doc["switches"].is_array()) {
    throw ConfigError("config rejected: top level must be {\"switches\": [...]}");
  }

  std::size_t si = 0;
  for (const auto& sw : doc["switches"]) {
    std::string sw_where = "switches[" + std::to_string(si++) + "]";
    SwitchState state;
    if (!sw.contains("id") || !sw["id"].is_number_unsigned()) {
      diag.add(sw_where, "missing numeric 'id'");
      continue;
    }
    state.switch_id = sw["id"].get<uint32_t>();
    uint64_t max_hops = sw.value("max_hops", 8u);
    if (max_hops < 1 || max_hops > 255) {
      diag.add(sw_where + ".max_hops", "must be in 1..255");
    } else {
      state.max_hops = static_cast<uint8_t>(max_hops);
    }

    std::size_t fi = 0;
    for (const auto& flow : sw.value("flows", json::array())) {
      std::string fl_where = sw_where + ".flows[" + std::to_string(fi++) + "]";
      FlowConfig cfg;
      if (flow.contains("match") && flow["match"].is_object()) {
        const auto& m = flow["match"];
        if (m.contains("src_ip")) cfg.match.src_ip = wildcardable<uint32_t>(m["src_ip"], fl_where + ".match.src_ip", diag, 0xFFFFFFFFull);
        if (m.contains("dst_ip")) cfg.match.dst_ip = wildcardable<uint32_t>(m["dst_ip"], fl_where + ".match.dst_ip", diag, 0xFFFFFFFFull);
        if (m.contains("src_port")) cfg.match.src_port = wildcardable<uint16_t>(m["src_port"], fl_where + ".match.src_port", diag, 0xFFFF);
        if (m.contains("dst_port")) cfg.match.dst_port = wildcardable<uint16_t>(m["dst_port"], fl_where + ".match.dst_port", diag, 0xFFFF);
        if (m.contains("proto")) cfg.match.proto = wildcardable<uint8_t>(m["proto"], fl_where + ".match.proto", diag, 0xFF);
      }
      auto role = role_from_name(flow.value("role", "off"));
      if (role) cfg.role = *role;
      else diag.add(fl_where + ".role", "unknown role '" + flow.value("role", "") + "'");
      if (flow.contains("mask")) cfg.mask = parse_mask(flow["mask"], fl_where + ".mask", diag);
      if (flow.contains("algorithm")) cfg.algorithm = parse_algorithm(flow["algorithm"], fl_where + ".algorithm", diag);
      cfg.priority = flow.value("priority", 0);
      try {
        state.flows.install(cfg);
      } catch (const ConfigError& e) {
        diag.add(fl_where, e.what());
      }
    }

    std::size_t ei = 0;
    for (const auto& entry : sw.value("expressions", json::array())) {
      std::string where = sw_where + ".expressions[" + std::to_string(ei++) + "]";
      if (!entry.is_object() || !entry.contains("index") || !entry.contains("text")) {
        diag.add(where, "expected {\"index\": n, \"text\": \"...\"}");
        continue;
      }
      try {
        state.expressions[entry["index"].get<std::size_t>()] =
            compile_expression(entry["text"].get<std::string>());
      } catch (const ConfigError& e) {
        diag.add(where, e.what());
      }
    }

    std::size_t ri = 0;
    for (const auto& route : sw.value("forwarding", json::array())) {
      std::string where = sw_where + ".forwarding[" + std::to_string(ri++) + "]";
      if (route.value("default", false)) {
        if (!route.contains("port") || !route["port"].is_number_unsigned()) {
          diag.add(where, "default route needs a numeric 'port'");
          continue;
        }
        state.default_port = route["port"].get<uint16_t>();
        continue;
      }
      ForwardingEntry fe;
      auto prefix = route.contains("prefix") && route["prefix"].is_string()
                        ? parse_ip(route["prefix"].get<std::string>())
                        : std::nullopt;
      if (!prefix) {
        diag.add(where + ".prefix", "expected dotted IPv4 string");
        continue;
      }
      fe.prefix = *prefix;
      uint64_t len = route.value("len", 32u);
      if (len > 32) {
        diag.add(where + ".len", "prefix length exceeds 32");
        continue;
      }
      fe.prefix_len = static_cast<uint8_t>(len);
      if (!route.contains("port") || !route["port"].is_number_unsigned()) {
        diag.add(where + ".port", "missing numeric egress port");
        continue;
      }
      fe.port = route["port"].get<uint16_t>();
      state.forwarding.push_back(fe);
    }

    out.switches.push_back(std::move(state));
  }

  if (!diag.empty()) throw ConfigError(diag.join());
  return out;
}

ConfigDocument load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Controller
// ---------------------------------------------------------------------------

std::shared_ptr<SwitchState> Controller::mutable_state(uint32_t switch_id) {
  auto it = switches_.find(switch_id);
  if (it == switches_.end()) {
    auto state = std::make_shared<SwitchState>();
    state->switch_id = switch_id;
    return state;
  }
  return std::make_shared<SwitchState>(*it->second);
}

void Controller::install_flow(uint32_t switch_id, const FlowConfig& cfg) {
  std::lock_guard lock(mu_);
  auto state = mutable_state(switch_id);
  state->flows.install(cfg);  // throws, leaving the published state untouched
  switches_[switch_id] = std::move(state);
  ++version_;
}

void Controller::install_expression(uint32_t switch_id, std::size_t index,
                                    const detection::CnfExpression& expr) {
  std::lock_guard lock(mu_);
  auto state = mutable_state(switch_id);
  state->expressions[index] = expr;
  switches_[switch_id] = std::move(state);
  ++version_;
}

void Controller::install_forwarding(uint32_t switch_id, const ForwardingEntry& entry) {
  std::lock_guard lock(mu_);
  auto state = mutable_state(switch_id);
  state->forwarding.push_back(entry);
  switches_[switch_id] = std::move(state);
  ++version_;
}

void Controller::set_default_port(uint32_t switch_id, uint16_t port) {
  std::lock_guard lock(mu_);
  auto state = mutable_state(switch_id);
  state->default_port = port;
  switches_[switch_id] = std::move(state);
  ++version_;
}

void Controller::set_max_hops(uint32_t switch_id, uint8_t max_hops) {
  std::lock_guard lock(mu_);
  auto state = mutable_state(switch_id);
  state->max_hops = max_hops;
  switches_[switch_id] = std::move(state);
  ++version_;
}

void Controller::apply(const ConfigDocument& doc) {
  // Document contents were validated at parse time; the swap itself cannot
  // fail halfway.
  std::lock_guard lock(mu_);
  for (const auto& state : doc.switches) {
    switches_[state.switch_id] = std::make_shared<const SwitchState>(state);
  }
  ++version_;
}

void Controller::load_config(const std::string& path) { apply(load_config_file(path)); }

std::shared_ptr<const SwitchState> Controller::snapshot(uint32_t switch_id) const {
  std::lock_guard lock(mu_);
  auto it = switches_.find(switch_id);
  if (it == switches_.end()) return nullptr;
  return it->second;
}

std::pair<std::shared_ptr<const SwitchState>, uint64_t> Controller::snapshot_versioned(
    uint32_t switch_id) const {
  std::lock_guard lock(mu_);
  auto it = switches_.find(switch_id);
  if (it == switches_.end()) return {nullptr, version_};
  return {it->second, version_};
}

uint64_t Controller::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

}  // namespace intforge::controlplane
