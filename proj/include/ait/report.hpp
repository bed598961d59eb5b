#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ait/canonical.hpp"
#include "ait/error.hpp"

namespace ait::report {

inline constexpr std::string_view kFrameworkVersion = "ait/1.0";

enum class Verdict { PASS, FAIL, ERROR, SKIPPED };
std::string_view to_string(Verdict v);
/// Throws SchemaError.
Verdict parse_verdict(std::string_view s);

struct StepOutcome {
  std::size_t index = 0;
  std::size_t action_index = 0;
  std::string keyword;
  std::string actor;
  Verdict verdict = Verdict::SKIPPED;
  std::int64_t duration_ms = 0;
  /// Keyword-specific result: message, SUT response, KPI samples, trace ref.
  /// "adapter_latency_ms" entries are wall-clock measurements.
  Json detail = Json::object();
  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

/// One per-UE KPI observation taken by query_kpi.
struct KpiSample {
  std::size_t step_index = 0;
  std::string actor;
  std::string ue;
  double data_rate = 0;    // throughput fraction
  double latency = 0;      // mean TTIs waited
  double packet_loss = 0;  // loss fraction
  friend bool operator==(const KpiSample&, const KpiSample&) = default;
};

struct Stat {
  double min = 0;
  double max = 0;
  double mean = 0;
  friend bool operator==(const Stat&, const Stat&) = default;
};

struct KpiSummary {
  double success_rate = 0;  // PASS / (PASS + FAIL + ERROR), 0 when nothing ran
  Stat data_rate;
  Stat latency;
  Stat packet_loss;
  std::size_t sample_count = 0;
  friend bool operator==(const KpiSummary&, const KpiSummary&) = default;
};

KpiSummary summarize(const std::vector<StepOutcome>& steps, const std::vector<KpiSample>& samples);

/// Reference to an exploration trace kept next to the record.
struct TraceRef {
  std::string id;  // "s<step>-<actor>"
  std::string actor;
  std::size_t step_index = 0;
  std::string method;
  std::string digest;
  Json summary = Json::object();
  friend bool operator==(const TraceRef&, const TraceRef&) = default;
};

struct RunRecord {
  std::string run_id;
  std::int64_t submitted_at = 0;
  std::string script;  // verbatim
  std::string script_hash;
  std::string config;  // verbatim
  std::string config_hash;
  std::uint64_t run_seed = 0;
  std::string mode;
  std::string phase;
  std::vector<std::string> setup_findings;
  std::vector<StepOutcome> steps;
  std::vector<TraceRef> traces;
  std::vector<KpiSample> samples;
  KpiSummary kpi;
  bool complete = true;
  std::vector<std::string> missing_actors;
  std::string framework_version{kFrameworkVersion};
  /// SUT version reported by each involved actor.
  std::map<std::string, std::string> sut_versions;
  std::optional<std::string> replay_of;
  bool sut_version_mismatch = false;
  /// Full trace documents by TraceRef id; stored as separate files.
  std::map<std::string, Json> trace_docs;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

Json to_json(const RunRecord& r);  // excludes trace_docs
/// Throws SchemaError.
RunRecord record_from_json(const Json& j);

/// Reproducible projection of a record: everything except run identity,
/// wall-clock times and replay lineage. Equal runs give equal bytes.
Json structured(const RunRecord& r);

enum class Format { Text, Structured };
/// Throws SchemaError for names other than "text" and "structured".
Format parse_format(std::string_view s);
/// Text: fixed "AIT-REPORT v1" layout. Structured: canonical JSON of structured(r).
std::string render(const RunRecord& r, Format f);

/// Returns (script, config) for resubmission; the config carries the
/// original run_seed. Throws IncompleteRecord for partial or non-terminal records.
std::pair<std::string, std::string> replay(const RunRecord& r);

/// Directory-per-run store: <root>/runs/<id>/record.json and
/// <root>/runs/<id>/traces/<trace id>.json, plus <root>/index.tsv.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path root);

  /// Atomic (temp file + rename). Re-storing identical content is a no-op;
  /// different content under an existing id throws ConflictError.
  void store(const RunRecord& r);
  /// Throws UnknownRun.
  RunRecord load(const std::string& run_id) const;
  bool exists(const std::string& run_id) const;
  /// Stored run ids, newest first.
  std::vector<std::string> list() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
};

}  // namespace ait::report
