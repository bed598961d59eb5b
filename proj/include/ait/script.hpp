#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ait/canonical.hpp"

namespace ait::script {

enum class Mode { SIM, SDR };
enum class ActionKind { Atomic, Running };

using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using Params = std::map<std::string, Scalar>;

Json to_json(const Scalar& s);
Json to_json(const Params& p);

struct TestAction {
  std::string name;
  ActionKind kind = ActionKind::Running;
  Params params;
  /// Nested AI-session parameters (the reserved `ai` key of run_ai_session).
  std::optional<Json> ai;
  std::optional<std::string> actor;

  friend bool operator==(const TestAction&, const TestAction&) = default;
};

struct CompositeDef {
  std::string name;
  std::vector<TestAction> steps;

  friend bool operator==(const CompositeDef&, const CompositeDef&) = default;
};

struct TestScript {
  Mode mode = Mode::SIM;
  std::vector<CompositeDef> definitions;
  std::vector<TestAction> actions;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const TestScript&, const TestScript&) = default;
};

struct ActorRef {
  std::string id;
  std::string address;

  friend bool operator==(const ActorRef&, const ActorRef&) = default;
};

struct TestConfig {
  std::vector<ActorRef> actors;
  std::string sut_endpoint;
  std::uint64_t run_seed = 0;
  double action_timeout = 0;  // seconds
  std::uint32_t max_parallel_runs = 1;

  friend bool operator==(const TestConfig&, const TestConfig&) = default;
};

/// Builtin keyword registry.
const std::set<std::string, std::less<>>& builtin_keywords();

/// Throws SyntaxError (not a YAML document, anchors/aliases, tags, multiple
/// documents) or SchemaError (missing/unknown fields, bad values).
TestScript parse_script(std::string_view text);
TestConfig parse_config(std::string_view text);

/// YAML text that parses back to an equal value.
std::string serialize(const TestScript& script);
std::string serialize(const TestConfig& config);

enum class Severity { Error, Warning };

struct Finding {
  Severity severity = Severity::Error;
  std::string code;
  /// Index of the offending top-level action, when the finding has one.
  std::optional<std::size_t> action_index;
  std::string reason;
};

struct ValidationReport {
  std::vector<Finding> findings;

  std::size_t error_count() const;
  bool ok() const { return error_count() == 0; }
  bool has(std::string_view code) const;
};

ValidationReport validate_integrity(const TestScript& script);
/// Parses then validates; parse failures become E_SYNTAX / E_SCHEMA findings.
ValidationReport validate_document(std::string_view text);

struct PlanStep {
  std::size_t action_index = 0;
  std::string keyword;
  Params params;
  std::optional<Json> ai;
  std::optional<std::string> actor;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct ExecutionPlan {
  std::vector<PlanStep> steps;

  Json to_json() const;
  friend bool operator==(const ExecutionPlan&, const ExecutionPlan&) = default;
};

/// Flattens running actions into atomic steps, depth-first through
/// composites. Throws ExpansionError if the script has validation errors.
ExecutionPlan expand(const TestScript& script);

std::string_view to_string(Mode m);
std::string_view to_string(Severity s);

}  // namespace ait::script
