#include "ait/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ait/digest.hpp"

namespace fs = std::filesystem;

namespace ait::report {

namespace {

std::string num(double x) { return fmt::format("{:.6g}", x); }

Json stat_json(const Stat& s) { return {{"min", s.min}, {"max", s.max}, {"mean", s.mean}}; }

Stat stat_from(const Json& j) { return {j.at("min").get<double>(), j.at("max").get<double>(), j.at("mean").get<double>()}; }

Json kpi_json(const KpiSummary& k) {
  return {{"success_rate", k.success_rate},
          {"data_rate", stat_json(k.data_rate)},
          {"latency", stat_json(k.latency)},
          {"packet_loss", stat_json(k.packet_loss)},
          {"sample_count", k.sample_count}};
}

Json sample_json(const KpiSample& s) {
  return {{"step_index", s.step_index}, {"actor", s.actor},     {"ue", s.ue},
          {"data_rate", s.data_rate},   {"latency", s.latency}, {"packet_loss", s.packet_loss}};
}

Json trace_ref_json(const TraceRef& t) {
  return {{"id", t.id},         {"actor", t.actor},   {"step_index", t.step_index},
          {"method", t.method}, {"digest", t.digest}, {"summary", t.summary}};
}

Json step_json(const StepOutcome& s, bool with_duration) {
  Json j{{"index", s.index},
         {"action_index", s.action_index},
         {"keyword", s.keyword},
         {"actor", s.actor},
         {"verdict", to_string(s.verdict)},
         {"detail", s.detail}};
  if (with_duration) j["duration_ms"] = s.duration_ms;
  return j;
}

void strip_key(Json& j, const std::string& key) {
  if (j.is_object()) {
    j.erase(key);
    for (auto& [k, v] : j.items()) strip_key(v, key);
  } else if (j.is_array()) {
    for (auto& v : j) strip_key(v, key);
  }
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::PASS:
      return "PASS";
    case Verdict::FAIL:
      return "FAIL";
    case Verdict::ERROR:
      return "ERROR";
    case Verdict::SKIPPED:
      return "SKIPPED";
  }
  return "?";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "PASS") return Verdict::PASS;
  if (s == "FAIL") return Verdict::FAIL;
  if (s == "ERROR") return Verdict::ERROR;
  if (s == "SKIPPED") return Verdict::SKIPPED;
  throw SchemaError("unknown verdict '" + std::string(s) + "'");
}

KpiSummary summarize(const std::vector<StepOutcome>& steps, const std::vector<KpiSample>& samples) {
  KpiSummary k;
  std::size_t pass = 0, counted = 0;
  for (const auto& s : steps) {
    if (s.verdict == Verdict::SKIPPED) continue;
    ++counted;
    if (s.verdict == Verdict::PASS) ++pass;
  }
  k.success_rate = counted ? static_cast<double>(pass) / static_cast<double>(counted) : 0.0;
  k.sample_count = samples.size();
  if (samples.empty()) return k;
  auto stat = [&](auto field) {
    Stat s{samples[0].*field, samples[0].*field, 0};
    double sum = 0;
    for (const auto& x : samples) {
      s.min = std::min(s.min, x.*field);
      s.max = std::max(s.max, x.*field);
      sum += x.*field;
    }
    s.mean = sum / static_cast<double>(samples.size());
    return s;
  };
  k.data_rate = stat(&KpiSample::data_rate);
  k.latency = stat(&KpiSample::latency);
  k.packet_loss = stat(&KpiSample::packet_loss);
  return k;
}

Json to_json(const RunRecord& r) {
  Json steps = Json::array(), traces = Json::array(), samples = Json::array();
  for (const auto& s : r.steps) steps.push_back(step_json(s, true));
  for (const auto& t : r.traces) traces.push_back(trace_ref_json(t));
  for (const auto& s : r.samples) samples.push_back(sample_json(s));
  Json j{{"run_id", r.run_id},
         {"submitted_at", r.submitted_at},
         {"script", r.script},
         {"script_hash", r.script_hash},
         {"config", r.config},
         {"config_hash", r.config_hash},
         {"run_seed", r.run_seed},
         {"mode", r.mode},
         {"phase", r.phase},
         {"setup_findings", r.setup_findings},
         {"steps", steps},
         {"traces", traces},
         {"samples", samples},
         {"kpi", kpi_json(r.kpi)},
         {"complete", r.complete},
         {"missing_actors", r.missing_actors},
         {"framework_version", r.framework_version},
         {"sut_versions", r.sut_versions},
         {"sut_version_mismatch", r.sut_version_mismatch}};
  if (r.replay_of) j["replay_of"] = *r.replay_of;
  return j;
}

RunRecord record_from_json(const Json& j) {
  RunRecord r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.submitted_at = j.at("submitted_at").get<std::int64_t>();
    r.script = j.at("script").get<std::string>();
    r.script_hash = j.at("script_hash").get<std::string>();
    r.config = j.at("config").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.run_seed = j.at("run_seed").get<std::uint64_t>();
    r.mode = j.at("mode").get<std::string>();
    r.phase = j.at("phase").get<std::string>();
    r.setup_findings = j.at("setup_findings").get<std::vector<std::string>>();
    for (const auto& s : j.at("steps")) {
      StepOutcome o;
      o.index = s.at("index").get<std::size_t>();
      o.action_index = s.at("action_index").get<std::size_t>();
      o.keyword = s.at("keyword").get<std::string>();
      o.actor = s.at("actor").get<std::string>();
      o.verdict = parse_verdict(s.at("verdict").get<std::string>());
      o.duration_ms = s.at("duration_ms").get<std::int64_t>();
      o.detail = s.at("detail");
      r.steps.push_back(std::move(o));
    }
    for (const auto& t : j.at("traces"))
      r.traces.push_back({t.at("id").get<std::string>(), t.at("actor").get<std::string>(),
                          t.at("step_index").get<std::size_t>(), t.at("method").get<std::string>(),
                          t.at("digest").get<std::string>(), t.at("summary")});
    for (const auto& s : j.at("samples"))
      r.samples.push_back({s.at("step_index").get<std::size_t>(), s.at("actor").get<std::string>(),
                           s.at("ue").get<std::string>(), s.at("data_rate").get<double>(), s.at("latency").get<double>(),
                           s.at("packet_loss").get<double>()});
    const auto& k = j.at("kpi");
    r.kpi.success_rate = k.at("success_rate").get<double>();
    r.kpi.data_rate = stat_from(k.at("data_rate"));
    r.kpi.latency = stat_from(k.at("latency"));
    r.kpi.packet_loss = stat_from(k.at("packet_loss"));
    r.kpi.sample_count = k.at("sample_count").get<std::size_t>();
    r.complete = j.at("complete").get<bool>();
    r.missing_actors = j.at("missing_actors").get<std::vector<std::string>>();
    r.framework_version = j.at("framework_version").get<std::string>();
    r.sut_versions = j.at("sut_versions").get<std::map<std::string, std::string>>();
    r.sut_version_mismatch = j.at("sut_version_mismatch").get<bool>();
    if (j.contains("replay_of")) r.replay_of = j["replay_of"].get<std::string>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

Json structured(const RunRecord& r) {
  Json steps = Json::array(), traces = Json::array(), samples = Json::array();
  for (const auto& s : r.steps) {
    auto j = step_json(s, false);
    strip_key(j["detail"], "adapter_latency_ms");
    steps.push_back(std::move(j));
  }
  for (const auto& t : r.traces) traces.push_back(trace_ref_json(t));
  for (const auto& s : r.samples) samples.push_back(sample_json(s));
  return {{"format", "ait-structured/1"},
          {"script_hash", r.script_hash},
          {"config_hash", r.config_hash},
          {"run_seed", r.run_seed},
          {"mode", r.mode},
          {"phase", r.phase},
          {"setup_findings", r.setup_findings},
          {"steps", steps},
          {"traces", traces},
          {"samples", samples},
          {"kpi", kpi_json(r.kpi)},
          {"complete", r.complete},
          {"missing_actors", r.missing_actors},
          {"framework_version", r.framework_version},
          {"sut_versions", r.sut_versions}};
}

Format parse_format(std::string_view s) {
  if (s == "text") return Format::Text;
  if (s == "structured") return Format::Structured;
  throw SchemaError("unknown report format '" + std::string(s) + "'");
}

std::string render(const RunRecord& r, Format f) {
  if (f == Format::Structured) return canonical(structured(r));

  std::string out;
  auto line = [&](const std::string& s) {
    out += s;
    out += '\n';
  };
  line("AIT-REPORT v1");
  line("run: " + r.run_id);
  line("phase: " + r.phase);
  line("mode: " + r.mode);
  line("run_seed: " + std::to_string(r.run_seed));
  line("script_hash: " + r.script_hash);
  line("config_hash: " + r.config_hash);
  line("framework: " + r.framework_version);
  std::string suts;
  for (const auto& [actor, v] : r.sut_versions) suts += (suts.empty() ? "" : " ") + actor + "=" + v;
  line("sut_version: " + (suts.empty() ? std::string("-") : suts));
  if (r.sut_version_mismatch) line("warning: SUT version differs from the replayed run");
  line(std::string("complete: ") + (r.complete ? "yes" : "no"));
  if (!r.missing_actors.empty()) {
    std::string m;
    for (const auto& a : r.missing_actors) m += (m.empty() ? "" : ",") + a;
    line("missing_actors: " + m);
  }
  for (const auto& f : r.setup_findings) line("setup: " + f);
  line("");
  line("STEPS");
  line(fmt::format("{:<5} {:<6} {:<16} {:<10} {:<8} {}", "step", "action", "keyword", "actor", "verdict", "detail"));
  for (const auto& s : r.steps) {
    std::string note = s.detail.contains("message") && s.detail["message"].is_string() ? s.detail["message"].get<std::string>() : "";
    line(fmt::format("{:<5} {:<6} {:<16} {:<10} {:<8} {}", s.index, s.action_index, s.keyword,
                     s.actor.empty() ? "-" : s.actor, to_string(s.verdict), note));
  }
  line("success_rate: " + num(r.kpi.success_rate));
  line("");
  line("KPI");
  line(fmt::format("{:<12} {:>10} {:>10} {:>10}", "metric", "min", "max", "mean"));
  auto row = [&](const char* name, const Stat& s) {
    line(fmt::format("{:<12} {:>10} {:>10} {:>10}", name, num(s.min), num(s.max), num(s.mean)));
  };
  row("data_rate", r.kpi.data_rate);
  row("latency", r.kpi.latency);
  row("packet_loss", r.kpi.packet_loss);
  line("samples: " + std::to_string(r.kpi.sample_count));
  if (!r.samples.empty()) {
    line(fmt::format("{:<5} {:<10} {:<12} {:>10} {:>10} {:>10}", "step", "actor", "ue", "data_rate", "latency", "loss"));
    for (const auto& s : r.samples)
      line(fmt::format("{:<5} {:<10} {:<12} {:>10} {:>10} {:>10}", s.step_index, s.actor, s.ue, num(s.data_rate),
                       num(s.latency), num(s.packet_loss)));
  }
  line("");
  line("AI SESSIONS");
  if (r.traces.empty()) line("none");
  for (const auto& t : r.traces) {
    line(fmt::format("{} step={} actor={} method={} digest={}", t.id, t.step_index, t.actor, t.method, t.digest));
    const auto& s = t.summary;
    if (t.method == "fuzz") {
      if (s.contains("best_fitness")) line("  best_fitness: " + s["best_fitness"].dump());
      if (s.contains("boundary_estimate")) line("  boundary_estimate: " + canonical(s["boundary_estimate"]));
    } else if (t.method == "sensitivity") {
      if (s.contains("index")) line("  index: " + canonical(s["index"]));
    } else if (t.method == "adversarial") {
      if (s.contains("found")) line(std::string("  result: ") + (s["found"].get<bool>() ? "FOUND" : "NOT_FOUND"));
      if (s.contains("norm")) line("  norm: " + s["norm"].dump());
    } else if (t.method == "rl") {
      if (s.contains("worst_state")) line("  worst_state: " + canonical(s["worst_state"]));
      if (s.contains("max_reward")) line("  max_reward: " + s["max_reward"].dump());
    }
    if (s.contains("queries")) line("  queries: " + s["queries"].dump());
  }
  return out;
}

std::pair<std::string, std::string> replay(const RunRecord& r) {
  if (!r.complete) throw IncompleteRecord("run " + r.run_id + " is missing results from some actors");
  if (r.phase != "COMPLETE" && r.phase != "ABORTED") throw IncompleteRecord("run " + r.run_id + " did not finish");
  return {r.script, r.config};
}

// ---------------------------------------------------------------- store

RunStore::RunStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "runs", ec);
  if (ec) throw IoError("cannot create run store at " + root_.string() + ": " + ec.message());
}

void RunStore::store(const RunRecord& r) {
  if (!valid_id(r.run_id)) throw IoError("invalid run id '" + r.run_id + "'");
  for (const auto& [id, _] : r.trace_docs)
    if (!valid_id(id)) throw IoError("invalid trace id '" + id + "'");
  const auto body = canonical(to_json(r));
  std::lock_guard lk(mu_);
  const auto dir = root_ / "runs" / r.run_id;
  const auto rec_path = dir / "record.json";
  if (auto existing = read_file(rec_path)) {
    bool same = *existing == body;
    for (const auto& [id, doc] : r.trace_docs) {
      if (!same) break;
      auto t = read_file(dir / "traces" / (id + ".json"));
      same = t && *t == canonical(doc);
    }
    if (!same) throw ConflictError("run " + r.run_id + " already stored with different content");
    return;
  }
  std::error_code ec;
  fs::create_directories(dir / "traces", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [id, doc] : r.trace_docs) write_atomic(dir / "traces" / (id + ".json"), canonical(doc));
  write_atomic(rec_path, body);
  std::ofstream idx(root_ / "index.tsv", std::ios::app);
  idx << r.run_id << '\t' << r.phase << '\t' << r.submitted_at << '\n';
}

RunRecord RunStore::load(const std::string& run_id) const {
  if (!valid_id(run_id)) throw UnknownRun(run_id);
  const auto dir = root_ / "runs" / run_id;
  auto body = read_file(dir / "record.json");
  if (!body) throw UnknownRun(run_id);
  Json j;
  try {
    j = Json::parse(*body);
  } catch (const Json::exception& e) {
    throw SchemaError("corrupt record for " + run_id + ": " + e.what());
  }
  auto r = record_from_json(j);
  for (const auto& t : r.traces) {
    auto doc = read_file(dir / "traces" / (t.id + ".json"));
    if (!doc) continue;
    try {
      r.trace_docs[t.id] = Json::parse(*doc);
    } catch (const Json::exception& e) {
      throw SchemaError("corrupt trace " + t.id + ": " + e.what());
    }
  }
  return r;
}

bool RunStore::exists(const std::string& run_id) const {
  return valid_id(run_id) && fs::exists(root_ / "runs" / run_id / "record.json");
}

std::vector<std::string> RunStore::list() const {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_ / "runs", ec))
    if (fs::exists(e.path() / "record.json")) ids.push_back(e.path().filename().string());
  std::sort(ids.rbegin(), ids.rend());
  return ids;
}

}  // namespace ait::report
