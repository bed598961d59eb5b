#include "ait/script.hpp"

#include <yaml-cpp/eventhandler.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <functional>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "ait/error.hpp"

namespace ait::script {

namespace {

// yaml-cpp tags: "?" for plain scalars, "!" for quoted ones.
constexpr std::string_view kPlainTag = "?";
constexpr std::string_view kQuotedTag = "!";

/// Rejects YAML features outside the accepted subset before building a tree.
class StrictHandler : public YAML::EventHandler {
 public:
  int documents = 0;

  void OnDocumentStart(const YAML::Mark&) override { ++documents; }
  void OnDocumentEnd() override {}
  void OnNull(const YAML::Mark& m, YAML::anchor_t a) override { check_anchor(m, a); }
  void OnAlias(const YAML::Mark& m, YAML::anchor_t) override { fail(m, "aliases are not allowed"); }
  void OnScalar(const YAML::Mark& m, const std::string& tag, YAML::anchor_t a, const std::string&) override {
    check_anchor(m, a);
    check_tag(m, tag);
  }
  void OnSequenceStart(const YAML::Mark& m, const std::string& tag, YAML::anchor_t a,
                       YAML::EmitterStyle::value) override {
    check_anchor(m, a);
    check_tag(m, tag);
  }
  void OnSequenceEnd() override {}
  void OnMapStart(const YAML::Mark& m, const std::string& tag, YAML::anchor_t a, YAML::EmitterStyle::value) override {
    check_anchor(m, a);
    check_tag(m, tag);
  }
  void OnMapEnd() override {}
  void OnAnchor(const YAML::Mark& m, const std::string&) override { fail(m, "anchors are not allowed"); }

 private:
  static void fail(const YAML::Mark& m, const std::string& what) {
    throw SyntaxError(fmt::format("line {}, column {}: {}", m.line + 1, m.column + 1, what));
  }
  static void check_anchor(const YAML::Mark& m, YAML::anchor_t a) {
    if (a != YAML::NullAnchor) fail(m, "anchors are not allowed");
  }
  static void check_tag(const YAML::Mark& m, const std::string& tag) {
    if (!tag.empty() && tag != kPlainTag && tag != kQuotedTag) fail(m, "explicit tags are not allowed");
  }
};

YAML::Node load_strict(std::string_view text) {
  std::string buf(text);
  try {
    std::istringstream in(buf);
    YAML::Parser parser(in);
    StrictHandler handler;
    while (parser.HandleNextDocument(handler)) {
    }
    if (handler.documents > 1) throw SyntaxError("multiple documents in one file");
    return YAML::Load(buf);
  } catch (const YAML::Exception& e) {
    throw SyntaxError(fmt::format("line {}, column {}: {}", e.mark.line + 1, e.mark.column + 1, e.msg));
  }
}

std::string where(const YAML::Node& n) {
  auto m = n.Mark();
  if (m.is_null()) return "";
  return fmt::format(" (line {})", m.line + 1);
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const std::string& ctx) {
  std::set<std::string> seen;
  for (const auto& kv : map) {
    if (!kv.first.IsScalar()) throw SchemaError(ctx + ": keys must be scalars" + where(kv.first));
    auto key = kv.first.Scalar();
    if (!seen.insert(key).second) throw SchemaError(ctx + ": duplicate key '" + key + "'" + where(kv.first));
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw SchemaError(ctx + ": unknown field '" + key + "'" + where(kv.first));
  }
}

const YAML::Node require_field(const YAML::Node& map, const char* key, const std::string& ctx) {
  auto n = map[key];
  if (!n.IsDefined() || n.IsNull()) throw SchemaError(ctx + ": missing required field '" + key + "'");
  return n;
}

std::string require_string(const YAML::Node& n, const std::string& ctx) {
  if (!n.IsScalar()) throw SchemaError(ctx + " must be a scalar" + where(n));
  return n.Scalar();
}

bool is_int_literal(const std::string& s) {
  static const std::regex re(R"([-+]?[0-9]+)");
  return std::regex_match(s, re);
}

bool is_float_literal(const std::string& s) {
  static const std::regex re(R"([-+]?(\.[0-9]+|[0-9]+(\.[0-9]*)?)([eE][-+]?[0-9]+)?)");
  return std::regex_match(s, re);
}

Scalar to_scalar(const YAML::Node& n, const std::string& ctx) {
  if (n.IsNull()) throw SchemaError(ctx + ": null values are not allowed" + where(n));
  if (!n.IsScalar()) throw SchemaError(ctx + ": expected a scalar" + where(n));
  const auto& v = n.Scalar();
  if (n.Tag() == kQuotedTag) return v;
  if (v == "true" || v == "True" || v == "TRUE") return true;
  if (v == "false" || v == "False" || v == "FALSE") return false;
  if (is_int_literal(v)) {
    std::int64_t i = 0;
    const char* b = v.data() + (v[0] == '+' ? 1 : 0);
    auto [p, ec] = std::from_chars(b, v.data() + v.size(), i);
    if (ec != std::errc() || p != v.data() + v.size()) throw SchemaError(ctx + ": integer out of range" + where(n));
    return i;
  }
  if (is_float_literal(v)) return std::stod(v);
  return v;
}

Json yaml_to_json(const YAML::Node& n, const std::string& ctx) {
  if (n.IsMap()) {
    Json j = Json::object();
    for (const auto& kv : n) {
      auto key = kv.first.Scalar();
      if (j.contains(key)) throw SchemaError(ctx + ": duplicate key '" + key + "'" + where(kv.first));
      j[key] = yaml_to_json(kv.second, ctx + "." + key);
    }
    return j;
  }
  if (n.IsSequence()) {
    Json j = Json::array();
    for (const auto& e : n) j.push_back(yaml_to_json(e, ctx + "[]"));
    return j;
  }
  return to_json(to_scalar(n, ctx));
}

ActionKind parse_kind(const YAML::Node& n, const std::string& ctx) {
  auto s = require_string(n, ctx + ".kind");
  if (s == "running" || s == "Running") return ActionKind::Running;
  if (s == "atomic" || s == "Atomic") return ActionKind::Atomic;
  throw SchemaError(ctx + ": kind must be 'running' or 'atomic', got '" + s + "'" + where(n));
}

TestAction parse_action(const YAML::Node& n, ActionKind default_kind, const std::string& ctx) {
  if (!n.IsMap()) throw SchemaError(ctx + " must be a map" + where(n));
  check_keys(n, {"name", "kind", "params", "actor"}, ctx);
  TestAction a;
  a.name = require_string(require_field(n, "name", ctx), ctx + ".name");
  a.kind = n["kind"] ? parse_kind(n["kind"], ctx) : default_kind;
  if (auto actor = n["actor"]; actor && !actor.IsNull()) a.actor = require_string(actor, ctx + ".actor");
  if (auto params = n["params"]; params && !params.IsNull()) {
    if (!params.IsMap()) throw SchemaError(ctx + ".params must be a map" + where(params));
    std::set<std::string> seen;
    for (const auto& kv : params) {
      auto key = kv.first.Scalar();
      if (!seen.insert(key).second) throw SchemaError(ctx + ".params: duplicate key '" + key + "'" + where(kv.first));
      if (key == "ai") {
        if (!kv.second.IsMap()) throw SchemaError(ctx + ".params.ai must be a map" + where(kv.second));
        a.ai = yaml_to_json(kv.second, ctx + ".params.ai");
        continue;
      }
      a.params.emplace(key, to_scalar(kv.second, ctx + ".params." + key));
    }
  }
  return a;
}

void check_schema_version(const YAML::Node& root) {
  auto v = require_field(root, "schema", "document");
  if (!v.IsScalar() || v.Scalar() != "1") throw SchemaError("document: unsupported schema version '" + v.Scalar() + "'");
}

// ---- emission ----

std::string format_double(double d) {
  auto s = fmt::format("{}", d);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void emit_json(YAML::Emitter& out, const Json& j) {
  switch (j.type()) {
    case Json::value_t::object:
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
        emit_json(out, v);
      }
      out << YAML::EndMap;
      break;
    case Json::value_t::array:
      out << YAML::BeginSeq;
      for (const auto& v : j) emit_json(out, v);
      out << YAML::EndSeq;
      break;
    case Json::value_t::string:
      out << YAML::DoubleQuoted << j.get<std::string>();
      break;
    case Json::value_t::boolean:
      out << (j.get<bool>() ? "true" : "false");
      break;
    case Json::value_t::number_integer:
      out << std::to_string(j.get<std::int64_t>());
      break;
    case Json::value_t::number_unsigned:
      out << std::to_string(j.get<std::uint64_t>());
      break;
    case Json::value_t::number_float:
      out << format_double(j.get<double>());
      break;
    default:
      throw EncodeError("cannot serialize value to YAML");
  }
}

void emit_action(YAML::Emitter& out, const TestAction& a) {
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << a.name;
  out << YAML::Key << "kind" << YAML::Value << (a.kind == ActionKind::Running ? "running" : "atomic");
  if (a.actor) out << YAML::Key << "actor" << YAML::Value << YAML::DoubleQuoted << *a.actor;
  if (!a.params.empty() || a.ai) {
    out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : a.params) {
      out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value;
      emit_json(out, to_json(v));
    }
    if (a.ai) {
      out << YAML::Key << "ai" << YAML::Value;
      emit_json(out, *a.ai);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
}

void collect_steps(const std::map<std::string, const CompositeDef*>& defs, const TestAction& call,
                   const TestAction& step, std::size_t action_index, std::vector<PlanStep>& out) {
  auto actor = step.actor ? step.actor : call.actor;
  if (auto it = defs.find(step.name); it != defs.end()) {
    TestAction inherited = step;
    inherited.actor = actor;
    for (const auto& [k, v] : call.params) inherited.params.emplace(k, v);
    for (const auto& inner : it->second->steps) collect_steps(defs, inherited, inner, action_index, out);
    return;
  }
  PlanStep ps;
  ps.action_index = action_index;
  ps.keyword = step.name;
  ps.params = step.params;
  for (const auto& [k, v] : call.params) ps.params.emplace(k, v);
  ps.ai = step.ai ? step.ai : call.ai;
  ps.actor = actor;
  out.push_back(std::move(ps));
}

}  // namespace

Json to_json(const Scalar& s) {
  return std::visit([](const auto& v) { return Json(v); }, s);
}

Json to_json(const Params& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = to_json(v);
  return j;
}

const std::set<std::string, std::less<>>& builtin_keywords() {
  static const std::set<std::string, std::less<>> k{"attach_request", "detach",    "send_traffic",   "await_response",
                                                    "set_impairment", "query_kpi", "run_ai_session", "sleep"};
  return k;
}

std::string_view to_string(Mode m) { return m == Mode::SIM ? "SIM" : "SDR"; }
std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

TestScript parse_script(std::string_view text) {
  auto root = load_strict(text);
  if (!root.IsDefined() || root.IsNull()) throw SchemaError("document: empty document (missing required fields)");
  if (!root.IsMap()) throw SchemaError("document: top level must be a map");
  check_keys(root, {"schema", "mode", "metadata", "definitions", "actions"}, "document");
  check_schema_version(root);

  TestScript s;
  auto mode = require_string(require_field(root, "mode", "document"), "document.mode");
  if (mode == "SIM")
    s.mode = Mode::SIM;
  else if (mode == "SDR")
    s.mode = Mode::SDR;
  else
    throw SchemaError("document.mode must be SIM or SDR, got '" + mode + "'");

  if (auto md = root["metadata"]; md && !md.IsNull()) {
    if (!md.IsMap()) throw SchemaError("document.metadata must be a map");
    std::set<std::string> seen;
    for (const auto& kv : md) {
      auto key = kv.first.Scalar();
      if (!seen.insert(key).second) throw SchemaError("document.metadata: duplicate key '" + key + "'");
      s.metadata[key] = require_string(kv.second, "metadata." + key);
    }
  }

  if (auto defs = root["definitions"]; defs && !defs.IsNull()) {
    if (!defs.IsSequence()) throw SchemaError("document.definitions must be a sequence");
    std::size_t i = 0;
    for (const auto& d : defs) {
      auto ctx = fmt::format("definitions[{}]", i++);
      if (!d.IsMap()) throw SchemaError(ctx + " must be a map");
      check_keys(d, {"name", "steps"}, ctx);
      CompositeDef def;
      def.name = require_string(require_field(d, "name", ctx), ctx + ".name");
      auto steps = require_field(d, "steps", ctx);
      if (!steps.IsSequence()) throw SchemaError(ctx + ".steps must be a sequence");
      std::size_t j = 0;
      for (const auto& st : steps) def.steps.push_back(parse_action(st, ActionKind::Atomic, fmt::format("{}.steps[{}]", ctx, j++)));
      s.definitions.push_back(std::move(def));
    }
  }

  auto actions = require_field(root, "actions", "document");
  if (!actions.IsSequence()) throw SchemaError("document.actions must be a sequence");
  std::size_t i = 0;
  for (const auto& a : actions) s.actions.push_back(parse_action(a, ActionKind::Running, fmt::format("actions[{}]", i++)));
  return s;
}

TestConfig parse_config(std::string_view text) {
  auto root = load_strict(text);
  if (!root.IsDefined() || root.IsNull()) throw SchemaError("config: empty document (missing required fields)");
  if (!root.IsMap()) throw SchemaError("config: top level must be a map");
  check_keys(root, {"schema", "actors", "sut_endpoint", "run_seed", "action_timeout", "max_parallel_runs"}, "config");
  check_schema_version(root);

  TestConfig c;
  auto actors = require_field(root, "actors", "config");
  if (!actors.IsSequence() || actors.size() == 0) throw SchemaError("config.actors must be a non-empty sequence");
  std::set<std::string> ids;
  std::size_t i = 0;
  for (const auto& a : actors) {
    auto ctx = fmt::format("config.actors[{}]", i++);
    if (!a.IsMap()) throw SchemaError(ctx + " must be a map");
    check_keys(a, {"id", "address"}, ctx);
    ActorRef ref;
    ref.id = require_string(require_field(a, "id", ctx), ctx + ".id");
    if (ref.id.empty()) throw SchemaError(ctx + ".id must be non-empty");
    if (a["address"]) ref.address = require_string(a["address"], ctx + ".address");
    if (!ids.insert(ref.id).second) throw SchemaError("config: duplicate actor id '" + ref.id + "'");
    c.actors.push_back(std::move(ref));
  }
  c.sut_endpoint = require_string(require_field(root, "sut_endpoint", "config"), "config.sut_endpoint");

  auto seed = require_field(root, "run_seed", "config");
  auto seed_text = require_string(seed, "config.run_seed");
  {
    auto [p, ec] = std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), c.run_seed);
    if (seed.Tag() == kQuotedTag || ec != std::errc() || p != seed_text.data() + seed_text.size())
      throw SchemaError("config.run_seed must be an unsigned 64-bit integer");
  }

  auto timeout = to_scalar(require_field(root, "action_timeout", "config"), "config.action_timeout");
  if (auto* d = std::get_if<double>(&timeout))
    c.action_timeout = *d;
  else if (auto* n = std::get_if<std::int64_t>(&timeout))
    c.action_timeout = static_cast<double>(*n);
  else
    throw SchemaError("config.action_timeout must be a number");
  if (!(c.action_timeout > 0)) throw SchemaError("config.action_timeout must be > 0");

  if (auto mp = root["max_parallel_runs"]; mp && !mp.IsNull()) {
    auto v = to_scalar(mp, "config.max_parallel_runs");
    auto* n = std::get_if<std::int64_t>(&v);
    if (!n || *n < 1 || *n > 1'000'000) throw SchemaError("config.max_parallel_runs must be a positive integer");
    c.max_parallel_runs = static_cast<std::uint32_t>(*n);
  }
  return c;
}

std::string serialize(const TestScript& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << 1;
  out << YAML::Key << "mode" << YAML::Value << std::string(to_string(s.mode));
  if (!s.metadata.empty()) {
    out << YAML::Key << "metadata" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : s.metadata) out << YAML::Key << YAML::DoubleQuoted << k << YAML::Value << YAML::DoubleQuoted << v;
    out << YAML::EndMap;
  }
  if (!s.definitions.empty()) {
    out << YAML::Key << "definitions" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : s.definitions) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << d.name;
      out << YAML::Key << "steps" << YAML::Value << YAML::BeginSeq;
      for (const auto& st : d.steps) emit_action(out, st);
      out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::Key << "actions" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : s.actions) emit_action(out, a);
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string serialize(const TestConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "schema" << YAML::Value << 1;
  out << YAML::Key << "actors" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : c.actors) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << YAML::DoubleQuoted << a.id;
    if (!a.address.empty()) out << YAML::Key << "address" << YAML::Value << YAML::DoubleQuoted << a.address;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "sut_endpoint" << YAML::Value << YAML::DoubleQuoted << c.sut_endpoint;
  out << YAML::Key << "run_seed" << YAML::Value << std::to_string(c.run_seed);
  out << YAML::Key << "action_timeout" << YAML::Value << format_double(c.action_timeout);
  out << YAML::Key << "max_parallel_runs" << YAML::Value << std::to_string(c.max_parallel_runs);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::size_t ValidationReport::error_count() const {
  std::size_t n = 0;
  for (const auto& f : findings) n += f.severity == Severity::Error;
  return n;
}

bool ValidationReport::has(std::string_view code) const {
  for (const auto& f : findings)
    if (f.code == code) return true;
  return false;
}

ValidationReport validate_integrity(const TestScript& s) {
  ValidationReport r;
  auto error = [&](std::string code, std::optional<std::size_t> idx, std::string reason) {
    r.findings.push_back({Severity::Error, std::move(code), idx, std::move(reason)});
  };
  auto warn = [&](std::string code, std::optional<std::size_t> idx, std::string reason) {
    r.findings.push_back({Severity::Warning, std::move(code), idx, std::move(reason)});
  };
  const auto& builtins = builtin_keywords();

  std::map<std::string, const CompositeDef*> defs;
  for (const auto& d : s.definitions) {
    if (d.name.empty()) {
      error("E_EMPTY_NAME", std::nullopt, "composite with empty name");
      continue;
    }
    if (builtins.count(d.name)) error("E_SHADOWS_BUILTIN", std::nullopt, "composite '" + d.name + "' shadows a builtin keyword");
    if (!defs.emplace(d.name, &d).second) error("E_DUPLICATE_DEFINITION", std::nullopt, "composite '" + d.name + "' defined twice");
    if (d.steps.empty()) error("E_EMPTY_COMPOSITE", std::nullopt, "composite '" + d.name + "' has no steps");
  }

  auto check_action = [&](const TestAction& a, std::optional<std::size_t> idx, const std::string& ctx) {
    if (a.name.empty()) {
      error("E_EMPTY_NAME", idx, ctx + ": action with empty name");
      return;
    }
    if (!builtins.count(a.name) && !defs.count(a.name))
      error("E_UNKNOWN_KEYWORD", idx, ctx + ": unknown keyword '" + a.name + "'");
    if (a.ai && a.name != "run_ai_session")
      error("E_AI_MISPLACED", idx, ctx + ": 'ai' parameters are only valid on run_ai_session");
    if (a.name == "run_ai_session") {
      static const std::set<std::string> kMethods{"sensitivity", "fuzz", "adversarial", "rl"};
      if (!a.ai || !a.ai->contains("method") || !(*a.ai)["method"].is_string() ||
          !kMethods.count((*a.ai)["method"].get<std::string>()))
        error("E_AI_PARAMS", idx, ctx + ": run_ai_session needs params.ai.method in {sensitivity, fuzz, adversarial, rl}");
    }
  };

  for (const auto& d : s.definitions)
    for (std::size_t j = 0; j < d.steps.size(); ++j) {
      const auto& st = d.steps[j];
      auto ctx = fmt::format("composite '{}' step {}", d.name, j);
      check_action(st, std::nullopt, ctx);
      if (st.kind != ActionKind::Atomic) error("E_RUNNING_IN_COMPOSITE", std::nullopt, ctx + ": composite steps must be atomic");
    }

  // One finding per back edge in the definition graph.
  std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
  std::function<void(const CompositeDef&)> visit = [&](const CompositeDef& d) {
    color[d.name] = 1;
    for (const auto& st : d.steps) {
      auto it = defs.find(st.name);
      if (it == defs.end()) continue;
      int c = color[st.name];
      if (c == 1)
        error("E_COMPOSITE_CYCLE", std::nullopt, "composite '" + d.name + "' references '" + st.name + "', forming a cycle");
      else if (c == 0)
        visit(*it->second);
    }
    color[d.name] = 2;
  };
  for (const auto& [name, d] : defs)
    if (color[name] == 0) visit(*d);

  if (s.actions.empty()) error("E_EMPTY_ACTIONS", std::nullopt, "script has no actions");
  std::set<std::string> used;
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    const auto& a = s.actions[i];
    check_action(a, i, fmt::format("action {}", i));
    if (a.kind == ActionKind::Atomic)
      error("E_ATOMIC_TOP_LEVEL", i,
            fmt::format("action {} ('{}') is atomic; atomic actions may only appear inside definitions", i, a.name));
    used.insert(a.name);
  }
  for (const auto& d : s.definitions)
    for (const auto& st : d.steps) used.insert(st.name);
  for (const auto& [name, _] : defs)
    if (!used.count(name)) warn("W_UNUSED_DEFINITION", std::nullopt, "composite '" + name + "' is never used");
  if (s.mode == Mode::SDR) warn("W_SDR_MODE", std::nullopt, "SDR mode parses but cannot be dispatched (no SDR adapter)");
  return r;
}

ValidationReport validate_document(std::string_view text) {
  try {
    return validate_integrity(parse_script(text));
  } catch (const SyntaxError& e) {
    return ValidationReport{{{Severity::Error, "E_SYNTAX", std::nullopt, e.what()}}};
  } catch (const SchemaError& e) {
    return ValidationReport{{{Severity::Error, "E_SCHEMA", std::nullopt, e.what()}}};
  }
}

Json ExecutionPlan::to_json() const {
  Json arr = Json::array();
  for (const auto& st : steps) {
    Json j{{"action_index", st.action_index}, {"keyword", st.keyword}, {"params", script::to_json(st.params)}};
    if (st.ai) j["ai"] = *st.ai;
    if (st.actor) j["actor"] = *st.actor;
    arr.push_back(std::move(j));
  }
  return arr;
}

ExecutionPlan expand(const TestScript& s) {
  auto report = validate_integrity(s);
  if (!report.ok()) {
    std::string msg = "cannot expand an invalid script:";
    for (const auto& f : report.findings)
      if (f.severity == Severity::Error) msg += " " + f.code;
    throw ExpansionError(msg);
  }
  std::map<std::string, const CompositeDef*> defs;
  for (const auto& d : s.definitions) defs.emplace(d.name, &d);

  ExecutionPlan plan;
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    TestAction none;
    collect_steps(defs, none, s.actions[i], i, plan.steps);
  }
  return plan;
}

}  // namespace ait::script
