#include "ait/actor.hpp"

#include <spdlog/spdlog.h>
#include <sys/statvfs.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace ait::actor {

using report::Verdict;
using wire::MsgType;

namespace {

constexpr std::size_t kTraceChunkBytes = 1u << 20;

double clamp_pct(double x) { return std::clamp(std::isfinite(x) ? x : 0.0, 0.0, 100.0); }

// ---- typed parameter access; ConfigError on bad types ----

std::string p_str(const Json& p, const char* key, std::optional<std::string> def = std::nullopt) {
  if (!p.contains(key)) {
    if (def) return *def;
    throw ConfigError(std::string("missing parameter '") + key + "'");
  }
  if (!p[key].is_string()) throw ConfigError(std::string("parameter '") + key + "' must be a string");
  return p[key].get<std::string>();
}

std::int64_t p_int(const Json& p, const char* key, std::optional<std::int64_t> def = std::nullopt) {
  if (!p.contains(key)) {
    if (def) return *def;
    throw ConfigError(std::string("missing parameter '") + key + "'");
  }
  if (!p[key].is_number_integer()) throw ConfigError(std::string("parameter '") + key + "' must be an integer");
  return p[key].get<std::int64_t>();
}

double p_num(const Json& p, const char* key, std::optional<double> def = std::nullopt) {
  if (!p.contains(key)) {
    if (def) return *def;
    throw ConfigError(std::string("missing parameter '") + key + "'");
  }
  if (!p[key].is_number()) throw ConfigError(std::string("parameter '") + key + "' must be a number");
  return p[key].get<double>();
}

Json::json_pointer field_ptr(const std::string& f) {
  try {
    return Json::json_pointer(f.empty() || f[0] == '/' ? f : "/" + f);
  } catch (const Json::exception& e) {
    throw ConfigError("bad field '" + f + "': " + e.what());
  }
}

StepReport fault(const std::string& message, std::string kind = {}) {
  StepReport r;
  r.verdict = Verdict::ERROR;
  r.detail = {{"message", message}};
  if (!kind.empty()) r.detail["kind"] = kind;
  return r;
}

}  // namespace

void validate(const ActorRuntimeConfig& cfg) {
  if (cfg.id.empty()) throw ConfigError("actor id must be non-empty");
  if (cfg.health_period.count() <= 0) throw ConfigError("health period must be > 0");
}

wire::HealthSnapshot probe_real() {
  wire::HealthSnapshot h;
  double load = 0;
  if (std::ifstream f("/proc/loadavg"); f) f >> load;
  long ncpu = sysconf(_SC_NPROCESSORS_ONLN);
  h.cpu_pct = clamp_pct(100.0 * load / static_cast<double>(std::max(1L, ncpu)));
  double total = 0, avail = 0;
  if (std::ifstream f("/proc/meminfo"); f) {
    std::string key, unit;
    double v;
    while (f >> key >> v >> unit) {
      if (key == "MemTotal:") total = v;
      if (key == "MemAvailable:") avail = v;
    }
  }
  h.mem_pct = total > 0 ? clamp_pct(100.0 * (1.0 - avail / total)) : 0.0;
  struct statvfs st {};
  if (statvfs("/", &st) == 0 && st.f_blocks > 0)
    h.disk_pct = clamp_pct(100.0 * (1.0 - static_cast<double>(st.f_bavail) / static_cast<double>(st.f_blocks)));
  h.hardware_ok = true;
  h.timestamp = unix_millis();
  return h;
}

std::vector<Millis> retry_with_backoff(const std::function<bool()>& attempt, Millis initial, Millis cap, Clock& clock,
                                       std::optional<std::size_t> max_attempts, const std::atomic<bool>* stop) {
  std::vector<Millis> delays;
  Millis delay = std::min(initial, cap);
  for (std::size_t n = 1;; ++n) {
    if (stop && stop->load()) return delays;
    if (attempt()) return delays;
    if (max_attempts && n >= *max_attempts)
      throw AdapterError("refused", "server unreachable after " + std::to_string(n) + " attempts");
    delays.push_back(delay);
    clock.sleep_for(delay);
    delay = std::min(delay * 2, cap);
  }
}

// ---------------------------------------------------------------- adapters

SimAdapter::SimAdapter(net::Endpoint ep, Millis timeout, Millis connect_timeout)
    : ep_(std::move(ep)), timeout_(timeout), connect_timeout_(connect_timeout) {}

Json SimAdapter::call(const std::string& op, const Json& body) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!conn_) conn_ = std::make_unique<wire::Connection>(net::connect_to(ep_, connect_timeout_));
  std::optional<wire::WireMessage> reply;
  try {
    auto seq = conn_->send(wire::make(MsgType::SUT_REQUEST, Json{{"op", op}, {"body", body}}));
    reply = conn_->receive(timeout_);
    if (!reply) {
      conn_.reset();
      throw AdapterError("timeout", "SUT did not answer '" + op + "' within " + std::to_string(timeout_.count()) + " ms");
    }
    latency_ms_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (reply->type == MsgType::ERROR)
      throw AdapterError("remote", "SUT error " + reply->payload.value("code", std::string("?")) + ": " +
                                       reply->payload.value("message", std::string()));
    if (reply->type != MsgType::SUT_RESPONSE || !reply->payload.contains("body") ||
        (reply->payload.contains("in_reply_to") && reply->payload["in_reply_to"] != seq)) {
      conn_.reset();
      throw AdapterError("malformed", "unexpected reply from SUT");
    }
  } catch (const AdapterError&) {
    throw;
  } catch (const Error& e) {
    conn_.reset();
    throw AdapterError(e.code() == "IO" ? "refused" : "malformed", std::string("SUT link: ") + e.what());
  }
  return reply->payload["body"];
}

Json SdrAdapter::call(const std::string&, const Json&) {
  throw AdapterError("unsupported", "SDR adapter not available");
}

// ---------------------------------------------------------------- executor

Executor::Executor(std::string actor_id, AdapterFactory factory) : id_(std::move(actor_id)), factory_(std::move(factory)) {}

std::string Executor::finish_run(const std::string& run_id) {
  std::lock_guard lk(mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) return "";
  auto v = it->second->sut_version;
  runs_.erase(it);
  return v;
}

Adapter& Executor::adapter(RunContext& ctx, const Json& params) {
  std::optional<std::string> ep;
  if (params.contains("sut_endpoint") && params["sut_endpoint"].is_string()) ep = params["sut_endpoint"].get<std::string>();
  if (!ctx.adapter || ctx.endpoint != ep) {
    ctx.adapter = factory_(ep);
    ctx.endpoint = ep;
  }
  bool known;
  {
    std::lock_guard lk(mu_);
    known = !ctx.sut_version.empty();
  }
  if (!known) {
    auto v = ctx.adapter->call("version", Json::object()).value("version", std::string("unknown"));
    std::lock_guard lk(mu_);
    ctx.sut_version = v;
  }
  return *ctx.adapter;
}

StepReport Executor::execute(const StepRequest& req, const std::atomic<bool>& cancel) {
  std::shared_ptr<RunContext> ctx;
  {
    std::lock_guard lk(mu_);
    auto& slot = runs_[req.run_id];
    if (!slot) slot = std::make_shared<RunContext>();
    ctx = slot;
  }
  try {
    return run(req, *ctx, cancel);
  } catch (const aicore::OracleFailure& f) {
    auto r = fault(f.what(), "oracle");
    r.trace = f.partial;
    return r;
  } catch (const AdapterError& e) {
    return fault(e.what(), e.kind);
  } catch (const Error& e) {
    return fault(e.what(), e.code());
  } catch (const std::exception& e) {
    return fault(std::string("internal fault: ") + e.what(), "internal");
  } catch (...) {
    return fault("internal fault", "internal");
  }
}

StepReport Executor::run(const StepRequest& req, RunContext& ctx, const std::atomic<bool>& cancel) {
  auto rng = CounterRng::for_step(req.run_seed, id_, req.step_index);
  const Json& p = req.params;
  StepReport out;
  out.verdict = Verdict::PASS;

  auto sut = [&](const std::string& op, const Json& body) {
    auto& a = adapter(ctx, p);
    auto resp = a.call(op, body);
    ctx.last_response = resp;
    out.detail["adapter_latency_ms"] = a.last_latency_ms();
    return resp;
  };

  const auto& kw = req.keyword;
  if (kw == "sleep") {
    auto ms = p_int(p, "ms", 0);
    if (ms < 0) throw ConfigError("ms must be >= 0");
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
    while (std::chrono::steady_clock::now() < until) {
      if (cancel) return fault("cancelled", "cancelled");
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
          std::chrono::milliseconds(10), until - std::chrono::steady_clock::now()));
    }
    out.detail["ms"] = ms;
  } else if (kw == "attach_request") {
    Json body{{"cell", p_str(p, "cell", "cell0")}, {"ue", p_str(p, "ue", id_)}, {"priority", p_num(p, "priority", 1.0)},
              {"demand", p_int(p, "demand", 0)}};
    auto resp = sut("attach", body);
    out.detail["session_id"] = resp.value("session_id", std::string());
    out.detail["response"] = resp;
  } else if (kw == "send_traffic") {
    auto target = p_str(p, "target", "scheduler");
    if (target == "scheduler") {
      Json body{{"cell", p_str(p, "cell", "cell0")}, {"ue", p_str(p, "ue", id_)}, {"demand", p_int(p, "demand")}};
      out.detail["response"] = sut("set_demand", body);
    } else if (target == "demod") {
      Json imps = Json::array();
      for (const auto& i : ctx.impairments) imps.push_back(aicore::to_json(i));
      if (p.contains("cfo")) imps.push_back(aicore::to_json(aicore::Cfo{p_num(p, "cfo")}));
      std::uint64_t seed = p.contains("seed") ? static_cast<std::uint64_t>(p_int(p, "seed")) : rng.next_u64();
      Json body{{"constellation", p_str(p, "constellation", "QPSK")},
                {"count", p_int(p, "count", 100)},
                {"noise_sigma", p_num(p, "noise_sigma", 0.0)},
                {"impairments", imps},
                {"seed", seed}};
      if (p.contains("classifier")) body["classifier"] = p_str(p, "classifier");
      out.detail["response"] = sut("demodulate", body);
    } else {
      throw ConfigError("unknown traffic target '" + target + "'");
    }
  } else if (kw == "query_kpi") {
    Json body{{"cell", p_str(p, "cell", "cell0")}, {"capacity", p_int(p, "capacity")}, {"tti_count", p_int(p, "tti_count", 1)}};
    auto resp = sut("run_cell", body);
    const auto own = p_str(p, "ue", id_);
    const bool all = p.contains("all_ues") && p["all_ues"].is_boolean() && p["all_ues"].get<bool>();
    const auto& ues = resp.at("ues");
    const auto& kpi = resp.at("kpi");
    for (std::size_t i = 0; i < ues.size() && i < kpi.size(); ++i) {
      auto ue = ues[i].get<std::string>();
      if (!all && ue != own) continue;
      out.samples.push_back({req.step_index, id_, ue, kpi[i].at("throughput_frac").get<double>(),
                             kpi[i].at("mean_latency_ttis").get<double>(), kpi[i].at("loss_frac").get<double>()});
    }
    out.detail["response"] = resp;
  } else if (kw == "detach") {
    out.detail["response"] = sut("detach", Json{{"cell", p_str(p, "cell", "cell0")}, {"ue", p_str(p, "ue", id_)}});
  } else if (kw == "set_impairment") {
    if (p.contains("clear") && p["clear"].is_boolean() && p["clear"].get<bool>()) {
      ctx.impairments.clear();
    } else {
      Json imp = Json::object();
      for (const char* k : {"kind", "cfo", "model", "gain_db", "phase_deg", "power", "tail"})
        if (p.contains(k)) imp[k] = p[k];
      ctx.impairments.push_back(aicore::impairment_from_json(imp));
    }
    Json list = Json::array();
    for (const auto& i : ctx.impairments) list.push_back(aicore::to_json(i));
    out.detail["impairments"] = list;
  } else if (kw == "await_response") {
    if (!ctx.last_response) return fault("no SUT response to check", "state");
    auto field = p_str(p, "field");
    auto ptr = field_ptr(field);
    out.detail["field"] = field;
    if (!ctx.last_response->contains(ptr)) {
      out.verdict = Verdict::FAIL;
      out.detail["message"] = "field '" + field + "' missing from the last response";
      return out;
    }
    const auto& v = ctx.last_response->at(ptr);
    out.detail["value"] = v;
    if (p.contains("equals") && v != p["equals"]) {
      out.verdict = Verdict::FAIL;
      out.detail["message"] = field + " = " + v.dump() + ", expected " + p["equals"].dump();
    }
    if (p.contains("min") || p.contains("max")) {
      if (!v.is_number()) {
        out.verdict = Verdict::FAIL;
        out.detail["message"] = field + " is not a number";
      } else {
        double x = v.get<double>();
        if (p.contains("min") && x < p_num(p, "min")) {
          out.verdict = Verdict::FAIL;
          out.detail["message"] = field + " = " + v.dump() + " below min " + p["min"].dump();
        }
        if (p.contains("max") && x > p_num(p, "max")) {
          out.verdict = Verdict::FAIL;
          out.detail["message"] = field + " = " + v.dump() + " above max " + p["max"].dump();
        }
      }
    }
  } else if (kw == "run_ai_session") {
    if (!p.contains("ai") || !p["ai"].is_object()) throw ConfigError("run_ai_session needs an 'ai' map");
    const auto seed = rng.next_u64();
    aicore::SutCall call = [&](const std::string& op, const Json& body) {
      if (cancel) throw OracleError("cancelled");
      return sut(op, body);
    };
    auto trace = aicore::run_session(p["ai"], seed, call);
    out.detail["trace"] = {{"id", "s" + std::to_string(req.step_index) + "-" + id_},
                           {"digest", trace.digest()},
                           {"method", aicore::to_string(trace.method)},
                           {"summary", aicore::session_summary(trace)}};
    out.trace = std::move(trace);
  } else {
    return fault("unknown keyword '" + kw + "'", "keyword");
  }
  return out;
}

// ---------------------------------------------------------------- actor

Actor::Actor(ActorRuntimeConfig cfg, Clock& clock)
    : cfg_(std::move(cfg)),
      clock_(clock),
      exec_(cfg_.id, [this](const std::optional<std::string>& ep) -> std::unique_ptr<Adapter> {
        return std::make_unique<SimAdapter>(ep ? net::parse_endpoint(*ep) : cfg_.sut, cfg_.sut_timeout,
                                            cfg_.connect_timeout);
      }) {
  validate(cfg_);
  if (cfg_.address.empty()) cfg_.address = "local";
}

Actor::~Actor() {
  stop();
  wait();
}

void Actor::start() {
  worker_thread_ = std::thread([this] { worker_loop(); });
  session_thread_ = std::thread([this] { session_loop(); });
  std::unique_lock lk(conn_mu_);
  registered_cv_.wait(lk, [&] { return registered_.load() || start_exc_ || stop_.load(); });
  if (start_exc_) {
    auto e = start_exc_;
    lk.unlock();
    stop();
    wait();
    std::rethrow_exception(e);
  }
}

void Actor::stop() {
  stop_ = true;
  {
    std::lock_guard lk(conn_mu_);
    if (conn_) conn_->shutdown();
  }
  registered_cv_.notify_all();
  work_cv_.notify_all();
  cancel_ = true;
}

void Actor::kill() {
  killed_ = true;
  stop();
}

void Actor::wait() {
  if (session_thread_.joinable() && session_thread_.get_id() != std::this_thread::get_id()) session_thread_.join();
  if (worker_thread_.joinable() && worker_thread_.get_id() != std::this_thread::get_id()) worker_thread_.join();
}

wire::HealthSnapshot Actor::snapshot() const {
  auto h = cfg_.probe == ProbeMode::Simulated ? cfg_.simulated : probe_real();
  h.active_steps = active_.load();
  if (cfg_.probe == ProbeMode::Real) h.timestamp = unix_millis();
  return h;
}

bool Actor::connect_once() {
  try {
    auto conn = std::make_shared<wire::Connection>(net::connect_to(cfg_.server, cfg_.connect_timeout));
    wire::RegisterInfo info{cfg_.id, cfg_.address, cfg_.health_period, snapshot()};
    wire::handshake(*conn, info, std::max(cfg_.connect_timeout, Millis(5000)));
    std::lock_guard lk(conn_mu_);
    conn_ = std::move(conn);
    return true;
  } catch (const HandshakeRejected& e) {
    if (e.code() == "CLOSED") return false;
    throw;
  } catch (const AdapterError&) {
    return false;
  } catch (const IoError&) {
    return false;
  } catch (const HandshakeTimeout&) {
    return false;
  }
}

void Actor::session_loop() {
  bool first = true;
  while (!stop_) {
    try {
      retry_with_backoff([this] { return connect_once(); }, cfg_.health_period, cfg_.backoff_cap, clock_,
                         cfg_.max_connect_attempts, &stop_);
    } catch (...) {
      spdlog::warn("actor {}: giving up on server {}", cfg_.id, cfg_.server.str());
      std::lock_guard lk(conn_mu_);
      if (first) start_exc_ = std::current_exception();
      stop_ = true;
      registered_cv_.notify_all();
      break;
    }
    if (stop_) break;
    {
      std::lock_guard lk(conn_mu_);
      registered_ = true;
    }
    registered_cv_.notify_all();
    first = false;
    spdlog::info("actor {} registered with {}", cfg_.id, cfg_.server.str());
    serve();
    registered_ = false;
    std::lock_guard lk(conn_mu_);
    conn_.reset();
  }
  stop_ = true;
  work_cv_.notify_all();
  registered_cv_.notify_all();
}

void Actor::send(wire::WireMessage m) {
  std::shared_ptr<wire::Connection> c;
  {
    std::lock_guard lk(conn_mu_);
    c = conn_;
  }
  if (!c || killed_) return;
  try {
    c->send(std::move(m));
  } catch (const std::exception& e) {
    spdlog::debug("actor {}: send failed: {}", cfg_.id, e.what());
  }
}

void Actor::health_loop(std::shared_ptr<wire::Connection> conn) {
  std::mutex m;
  std::unique_lock lk(m);
  while (!stop_) {
    auto deadline = std::chrono::steady_clock::now() + cfg_.health_period;
    while (!stop_ && std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(std::chrono::milliseconds(20),
                                                                               deadline - std::chrono::steady_clock::now()));
    if (stop_) break;
    {
      std::lock_guard cl(conn_mu_);
      if (conn_ != conn) break;
    }
    try {
      conn->send(wire::make(MsgType::HEALTH_REPORT, Json{{"health", snapshot()}}));
      ++health_sent_;
    } catch (const std::exception&) {
      break;
    }
  }
}

void Actor::serve() {
  std::shared_ptr<wire::Connection> conn;
  {
    std::lock_guard lk(conn_mu_);
    conn = conn_;
  }
  std::thread health([this, conn] { health_loop(conn); });
  while (!stop_) {
    std::optional<wire::WireMessage> m;
    try {
      m = conn->receive(Millis(200));
    } catch (const std::exception& e) {
      spdlog::info("actor {}: connection lost: {}", cfg_.id, e.what());
      break;
    }
    if (!m) continue;
    switch (m->type) {
      case MsgType::DISPATCH_STEP:
        on_dispatch(*m);
        break;
      case MsgType::ABORT: {
        std::lock_guard lk(work_mu_);
        auto run = m->payload.value("run_id", std::string());
        if (current_ && current_->first == run &&
            (!m->payload.contains("step_index") || m->payload["step_index"] == current_->second))
          cancel_ = true;
        break;
      }
      case MsgType::RUN_COMPLETE: {
        if (die_on_complete_) {
          kill();
          break;
        }
        auto run = m->payload.value("run_id", std::string());
        Json traces = Json::array();
        {
          std::lock_guard lk(work_mu_);
          for (const auto& [id, digest] : run_traces_[run]) traces.push_back({{"id", id}, {"digest", digest}});
          run_traces_.erase(run);
        }
        auto version = exec_.finish_run(run);
        send(wire::make(MsgType::RUN_COMPLETE,
                        Json{{"run_id", run}, {"actor_id", cfg_.id}, {"sut_version", version}, {"traces", traces}}, run));
        break;
      }
      case MsgType::ERROR:
        spdlog::warn("actor {}: server error {}: {}", cfg_.id, m->payload.value("code", std::string()),
                     m->payload.value("message", std::string()));
        break;
      default:
        break;
    }
  }
  conn->shutdown();
  health.join();
}

void Actor::on_dispatch(const wire::WireMessage& m) {
  StepRequest req;
  req.run_id = m.payload["run_id"].get<std::string>();
  req.step_index = m.payload["step_index"].get<std::size_t>();
  req.keyword = m.payload["keyword"].get<std::string>();
  req.params = m.payload["params"];
  if (m.payload.contains("sut_endpoint") && m.payload["sut_endpoint"].is_string())
    req.params["sut_endpoint"] = m.payload["sut_endpoint"];
  if (m.payload.contains("run_seed") && is_uint(m.payload["run_seed"]))
    req.run_seed = m.payload["run_seed"].get<std::uint64_t>();
  {
    std::lock_guard lk(work_mu_);
    // a cancelled step is only winding down; its successor waits for it
    if (!busy_ || (cancel_ && !pending_)) {
      busy_ = true;
      pending_ = std::move(req);
      work_cv_.notify_all();
      return;
    }
  }
  send(wire::make(MsgType::STEP_RESULT,
                  Json{{"run_id", req.run_id},
                       {"step_index", req.step_index},
                       {"verdict", "ERROR"},
                       {"detail", {{"message", "actor busy"}, {"kind", "busy"}}}},
                  req.run_id));
}

void Actor::worker_loop() {
  for (;;) {
    StepRequest req;
    {
      std::unique_lock lk(work_mu_);
      work_cv_.wait(lk, [&] { return pending_.has_value() || stop_.load(); });
      if (stop_) return;
      req = std::move(*pending_);
      pending_.reset();
      current_ = {req.run_id, req.step_index};
      cancel_ = false;
    }
    auto n = ++active_;
    auto prev = max_active_.load();
    while (n > prev && !max_active_.compare_exchange_weak(prev, n)) {
    }

    std::mutex tick_mu;
    std::condition_variable tick_cv;
    bool finished = false;
    std::thread ticker([&] {
      std::unique_lock lk(tick_mu);
      while (!tick_cv.wait_for(lk, cfg_.status_period, [&] { return finished; }))
        send(wire::make(MsgType::STEP_STATUS,
                        Json{{"run_id", req.run_id}, {"step_index", req.step_index}, {"state", "running"}}, req.run_id));
    });
    auto rep = exec_.execute(req, cancel_);
    {
      std::lock_guard lk(tick_mu);
      finished = true;
    }
    tick_cv.notify_all();
    ticker.join();

    Json result{{"run_id", req.run_id},
                {"step_index", req.step_index},
                {"verdict", report::to_string(rep.verdict)},
                {"detail", rep.detail}};
    if (rep.trace) {
      const auto id = "s" + std::to_string(req.step_index) + "-" + cfg_.id;
      const auto doc = canonical(rep.trace->to_json());
      const auto digest = rep.trace->digest();
      const std::size_t total = std::max<std::size_t>(1, (doc.size() + kTraceChunkBytes - 1) / kTraceChunkBytes);
      for (std::size_t c = 0; c < total; ++c)
        send(wire::make(MsgType::STEP_STATUS,
                        Json{{"run_id", req.run_id},
                             {"step_index", req.step_index},
                             {"trace_chunk",
                              {{"id", id}, {"index", c}, {"total", total},
                               {"data", doc.substr(c * kTraceChunkBytes, kTraceChunkBytes)}}}},
                        req.run_id));
      if (!result["detail"].contains("trace"))
        result["detail"]["trace"] = {{"id", id},
                                     {"digest", digest},
                                     {"method", aicore::to_string(rep.trace->method)},
                                     {"summary", aicore::session_summary(*rep.trace)}};
      std::lock_guard lk(work_mu_);
      run_traces_[req.run_id].push_back({id, digest});
    }
    Json samples = Json::array();
    for (const auto& s : rep.samples)
      samples.push_back({{"ue", s.ue}, {"data_rate", s.data_rate}, {"latency", s.latency}, {"packet_loss", s.packet_loss}});
    result["samples"] = samples;
    --active_;
    {
      std::lock_guard lk(work_mu_);
      current_.reset();
      busy_ = pending_.has_value();
    }
    send(wire::make(MsgType::STEP_RESULT, std::move(result), req.run_id));
  }
}

}  // namespace ait::actor
