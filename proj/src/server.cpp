#include "ait/server.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ait/digest.hpp"

namespace ait::server {

using report::Verdict;
using wire::MsgType;

std::string_view to_string(ActorState s) {
  switch (s) {
    case ActorState::IDLE:
      return "IDLE";
    case ActorState::BUSY:
      return "BUSY";
    case ActorState::OFFLINE:
      return "OFFLINE";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::QUEUED:
      return "QUEUED";
    case Phase::RUNNING:
      return "RUNNING";
    case Phase::COMPLETE:
      return "COMPLETE";
    case Phase::ABORTED:
      return "ABORTED";
    case Phase::FAILED_SETUP:
      return "FAILED_SETUP";
  }
  return "?";
}

bool terminal(Phase p) { return p == Phase::COMPLETE || p == Phase::ABORTED || p == Phase::FAILED_SETUP; }

Json to_json(const ActorDescriptor& a) {
  Json j{{"id", a.id}, {"address", a.address}, {"state", to_string(a.state)}};
  j["health"] = a.last_health ? Json(*a.last_health) : Json(nullptr);
  j["current_run"] = a.current_run ? Json(*a.current_run) : Json(nullptr);
  return j;
}

Json to_json(const RunSnapshot& s) {
  Json actors = Json::array();
  for (const auto& a : s.actors) actors.push_back(to_json(a));
  return {{"run_id", s.run_id},       {"phase", to_string(s.phase)}, {"cursor", s.cursor},
          {"plan_size", s.plan_size}, {"verdicts", s.verdicts},      {"findings", s.findings},
          {"actors", actors},         {"submitted_at", s.submitted_at}};
}

struct Server::Peer {
  std::shared_ptr<wire::Connection> conn;
  std::string token;
};

struct Server::Run {
  std::string id;
  std::int64_t submitted_at = 0;
  std::string script_text;
  std::string config_text;
  script::TestScript script;
  script::TestConfig config;
  script::ExecutionPlan plan;
  std::vector<std::string> actor_ids;
  Phase phase = Phase::QUEUED;
  std::size_t cursor = 0;
  std::vector<report::StepOutcome> steps;
  std::vector<std::string> findings;
  Millis queued_at{0};
  std::optional<std::string> replay_of;
  bool abort_requested = false;
  bool halt_on_error = true;
  bool finalizing = false;
  std::deque<std::pair<std::string, wire::WireMessage>> mailbox;
  std::map<std::string, std::pair<std::size_t, std::string>> trace_buf;  // id -> (chunks seen, bytes)
  std::map<std::string, Json> trace_docs;
  std::vector<report::KpiSample> samples;
  std::vector<report::TraceRef> trace_refs;
  std::set<std::string> involved;
  std::optional<report::RunRecord> record;
};

namespace {

std::string new_token() {
  std::random_device rd;
  std::string seed;
  for (int i = 0; i < 4; ++i) seed += std::to_string(rd());
  return sha256_hex(seed + std::to_string(unix_millis())).substr(0, 32);
}

}  // namespace

Server::Server(ServerOptions opts, Clock& clock) : opts_(std::move(opts)), clock_(clock), store_(opts_.store_root) {}

Server::~Server() { stop(); }

void Server::start() {
  actor_listener_ = std::make_unique<net::Listener>(opts_.actor_bind);
  control_listener_ = std::make_unique<net::Listener>(opts_.control_bind);
  spawn(std::thread([this] { actor_accept_loop(); }));
  spawn(std::thread([this] { control_accept_loop(); }));
  if (opts_.housekeeping) spawn(std::thread([this] { housekeeping_loop(); }));
  spdlog::info("server: actors on {}, control on {}", actor_port(), control_port());
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  {
    std::lock_guard lk(threads_mu_);
    for (auto& c : live_) c->shutdown();
  }
  cv_.notify_all();
  for (;;) {
    std::vector<std::thread> ts;
    {
      std::lock_guard lk(threads_mu_);
      ts.swap(threads_);
    }
    if (ts.empty()) break;
    for (auto& t : ts)
      if (t.joinable()) t.join();
  }
  if (actor_listener_) actor_listener_->close();
  if (control_listener_) control_listener_->close();
}

std::uint16_t Server::actor_port() const { return actor_listener_ ? actor_listener_->port() : 0; }
std::uint16_t Server::control_port() const { return control_listener_ ? control_listener_->port() : 0; }

void Server::spawn(std::thread t) {
  std::lock_guard lk(threads_mu_);
  threads_.push_back(std::move(t));
}

void Server::record_event(const std::string& event, const std::string& run, const std::string& actor, std::size_t step) {
  log_.push_back({++log_seq_, event, run, actor, step});
}

std::vector<LogEntry> Server::log() const {
  std::lock_guard lk(mu_);
  return log_;
}

// ---------------------------------------------------------------- registry

std::vector<ActorDescriptor> Server::actors() const {
  std::lock_guard lk(mu_);
  std::vector<ActorDescriptor> out;
  for (const auto& [_, a] : registry_) out.push_back(a);
  return out;
}

std::optional<ActorDescriptor> Server::actor(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = registry_.find(id);
  if (it == registry_.end()) return std::nullopt;
  return it->second;
}

void Server::mark_offline_locked(const std::string& id) {
  auto it = registry_.find(id);
  if (it == registry_.end() || it->second.state == ActorState::OFFLINE) return;
  it->second.state = ActorState::OFFLINE;
  if (auto p = peers_.find(id); p != peers_.end()) {
    p->second->conn->shutdown();
    peers_.erase(p);
  }
  spdlog::warn("server: actor {} is offline", id);
  cv_.notify_all();
}

void Server::check_liveness() {
  std::lock_guard lk(mu_);
  const auto now = clock_.now();
  std::vector<std::string> dead;
  for (const auto& [id, a] : registry_)
    if (a.state != ActorState::OFFLINE &&
        now - a.last_seen > a.health_period * static_cast<std::int64_t>(opts_.missed_reports))
      dead.push_back(id);
  for (const auto& id : dead) mark_offline_locked(id);
}

void Server::housekeeping_loop() {
  while (!stopping_) {
    check_liveness();
    schedule();
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, opts_.housekeeping_period, [&] { return stopping_.load(); });
  }
}

void Server::actor_accept_loop() {
  while (!stopping_) {
    std::optional<net::Socket> s;
    try {
      s = actor_listener_->accept(Millis(100));
    } catch (const std::exception& e) {
      if (!stopping_) spdlog::error("server: accept failed: {}", e.what());
      continue;
    }
    if (!s) continue;
    auto conn = std::make_shared<wire::Connection>(std::move(*s));
    {
      std::lock_guard lk(threads_mu_);
      if (stopping_) break;
      live_.push_back(conn);
    }
    spawn(std::thread([this, conn] { serve_actor(conn); }));
  }
}

void Server::serve_actor(std::shared_ptr<wire::Connection> conn) {
  std::string actor_id;
  std::string token;
  auto fail_and_close = [&](std::string_view code, const std::string& why) {
    try {
      conn->send(wire::make_error(code, why));
    } catch (const std::exception&) {
    }
    conn->shutdown();
  };

  try {
    auto first = conn->receive(opts_.register_timeout);
    if (!first) return fail_and_close("REGISTER_TIMEOUT", "no REGISTER received");
    if (first->type != MsgType::REGISTER) return fail_and_close("PROTOCOL", "expected REGISTER");
    actor_id = first->payload["actor_id"].get<std::string>();
    std::lock_guard lk(mu_);
    auto& d = registry_[actor_id];
    if (!d.id.empty() && d.state != ActorState::OFFLINE) {
      spdlog::warn("server: duplicate registration for {}", actor_id);
      actor_id.clear();
      return fail_and_close("DUPLICATE_ID", "actor id already registered");
    }
    d.id = actor_id;
    d.address = first->payload["address"].get<std::string>();
    d.health_period = Millis(first->payload.value("health_period_ms", std::uint64_t{2000}));
    if (first->payload.contains("health")) d.last_health = first->payload["health"].get<wire::HealthSnapshot>();
    d.state = d.current_run ? ActorState::BUSY : ActorState::IDLE;
    d.last_seen = clock_.now();
    token = new_token();
    peers_[actor_id] = std::make_shared<Peer>(Peer{conn, token});
    conn->send(wire::make(MsgType::REGISTER_ACK, Json{{"token", token}}));
    spdlog::info("server: actor {} registered ({})", actor_id, d.address);
    cv_.notify_all();
  } catch (const VersionError& e) {
    return fail_and_close("UNSUPPORTED_VERSION", e.what());
  } catch (const std::exception& e) {
    return fail_and_close("MALFORMED", e.what());
  }

  while (!stopping_) {
    std::optional<wire::WireMessage> m;
    try {
      m = conn->receive(Millis(200));
    } catch (const VersionError& e) {
      fail_and_close("UNSUPPORTED_VERSION", e.what());
      break;
    } catch (const wire::ConnectionClosed&) {
      break;
    } catch (const std::exception& e) {
      spdlog::warn("server: dropping actor {}: {}", actor_id, e.what());
      fail_and_close("PROTOCOL", e.what());
      break;
    }
    if (!m) {
      std::lock_guard lk(mu_);
      auto p = peers_.find(actor_id);
      if (p == peers_.end() || p->second->conn != conn) break;  // marked offline meanwhile
      continue;
    }
    if (m->token != token) {
      try {
        conn->send(wire::make_error("BAD_TOKEN", "missing or wrong session token"));
      } catch (const std::exception&) {
      }
      continue;
    }
    std::lock_guard lk(mu_);
    auto p = peers_.find(actor_id);
    if (p == peers_.end() || p->second->conn != conn) break;
    auto& d = registry_[actor_id];
    d.last_seen = clock_.now();
    switch (m->type) {
      case MsgType::HEALTH_REPORT:
        d.last_health = m->payload["health"].get<wire::HealthSnapshot>();
        break;
      case MsgType::STEP_STATUS:
      case MsgType::STEP_RESULT:
      case MsgType::RUN_COMPLETE:
        route_locked(actor_id, *m);
        break;
      case MsgType::ERROR:
        spdlog::warn("server: actor {} reported {}: {}", actor_id, m->payload["code"].get<std::string>(),
                     m->payload["message"].get<std::string>());
        break;
      default:
        try {
          conn->send(wire::make_error("UNEXPECTED", "unexpected message type " + std::string(to_string(m->type))));
        } catch (const std::exception&) {
        }
    }
  }

  conn->shutdown();
  std::lock_guard lk(mu_);
  if (!actor_id.empty()) {
    auto p = peers_.find(actor_id);
    if (p != peers_.end() && p->second->conn == conn) mark_offline_locked(actor_id);
  }
}

void Server::route_locked(const std::string& actor_id, const wire::WireMessage& m) {
  auto run = find_run_locked(m.run_id.value_or(""));
  if (!run) return;
  if (m.type == MsgType::STEP_STATUS) {
    if (!m.payload.contains("trace_chunk")) return;
    const auto& c = m.payload["trace_chunk"];
    try {
      auto id = c.at("id").get<std::string>();
      auto index = c.at("index").get<std::size_t>();
      auto total = c.at("total").get<std::size_t>();
      auto& [seen, bytes] = run->trace_buf[id];
      if (index != seen) return;
      bytes += c.at("data").get<std::string>();
      ++seen;
      if (seen == total) {
        run->trace_docs[id] = Json::parse(bytes);
        run->trace_buf.erase(id);
      }
    } catch (const std::exception& e) {
      spdlog::warn("server: bad trace chunk from {}: {}", actor_id, e.what());
    }
    return;
  }
  run->mailbox.emplace_back(actor_id, m);
  cv_.notify_all();
}

// ---------------------------------------------------------------- runs

std::shared_ptr<Server::Run> Server::find_run_locked(const std::string& id) const {
  for (const auto& r : runs_)
    if (r->id == id) return r;
  return nullptr;
}

std::string Server::submit(const std::string& script_text, const std::string& config_text,
                           std::optional<std::string> replay_of) {
  auto run = std::make_shared<Run>();
  run->id = make_run_id();
  run->submitted_at = unix_millis();
  run->script_text = script_text;
  run->config_text = config_text;
  run->replay_of = std::move(replay_of);

  std::vector<std::string> reasons;
  try {
    run->config = script::parse_config(config_text);
  } catch (const Error& e) {
    reasons.push_back(std::string("config: ") + e.what());
  }
  auto report = script::validate_document(script_text);
  for (const auto& f : report.findings)
    if (f.severity == script::Severity::Error) reasons.push_back(f.code + ": " + f.reason);
  if (reasons.empty()) {
    run->script = script::parse_script(script_text);
    if (run->script.mode == script::Mode::SDR) reasons.push_back("SDR adapter not available");
  }
  if (reasons.empty()) {
    run->plan = script::expand(run->script);
    if (run->config.actors.empty()) reasons.push_back("config lists no actors");
    std::set<std::string> known;
    for (const auto& a : run->config.actors) known.insert(a.id);
    for (const auto& s : run->plan.steps)
      if (s.actor && !known.count(*s.actor)) reasons.push_back("step bound to actor '" + *s.actor + "' not in config");
    auto it = run->script.metadata.find("on_error");
    if (it != run->script.metadata.end()) {
      if (it->second == "continue")
        run->halt_on_error = false;
      else if (it->second != "halt")
        reasons.push_back("metadata on_error must be 'halt' or 'continue'");
    }
  }
  for (const auto& a : run->config.actors) run->actor_ids.push_back(a.id);
  run->steps.resize(run->plan.steps.size());
  for (std::size_t i = 0; i < run->plan.steps.size(); ++i) {
    const auto& ps = run->plan.steps[i];
    auto& s = run->steps[i];
    s.index = i;
    s.action_index = ps.action_index;
    s.keyword = ps.keyword;
    s.actor = ps.actor.value_or(run->actor_ids.empty() ? "" : run->actor_ids.front());
  }
  run->queued_at = clock_.now();

  {
    std::lock_guard lk(mu_);
    if (!reasons.empty()) {
      run->phase = Phase::FAILED_SETUP;
      run->findings = reasons;
    }
    runs_.push_back(run);
  }
  if (!reasons.empty()) {
    finalize(run);
    throw RejectedError(run->id, reasons);
  }
  schedule();
  return run->id;
}

void Server::schedule() {
  std::vector<std::shared_ptr<Run>> to_start, to_finalize;
  {
    std::lock_guard lk(mu_);
    if (stopping_) return;
    std::size_t running = 0;
    for (const auto& r : runs_)
      if (r->phase == Phase::RUNNING) ++running;
    const auto now = clock_.now();
    for (const auto& r : runs_) {
      if (r->phase != Phase::QUEUED) continue;
      if (r->abort_requested) {
        r->phase = Phase::ABORTED;
        for (auto& s : r->steps) s.verdict = Verdict::SKIPPED;
        to_finalize.push_back(r);
        continue;
      }
      std::vector<std::string> missing;
      bool taken = false;
      for (const auto& id : r->actor_ids) {
        auto it = registry_.find(id);
        if (it == registry_.end() || it->second.state == ActorState::OFFLINE)
          missing.push_back(id);
        else if (it->second.current_run)
          taken = true;
      }
      if (!missing.empty()) {
        if (now - r->queued_at >= opts_.setup_timeout) {
          std::string list;
          for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
          r->phase = Phase::FAILED_SETUP;
          r->findings.push_back("actors not available within setup timeout: " + list);
          for (auto& s : r->steps) s.verdict = Verdict::SKIPPED;
          to_finalize.push_back(r);
        }
        continue;
      }
      const auto limit = std::min<std::size_t>(opts_.max_parallel_runs, std::max<std::uint32_t>(1, r->config.max_parallel_runs));
      if (taken || running >= limit) continue;
      for (const auto& id : r->actor_ids) {
        auto& d = registry_[id];
        d.current_run = r->id;
        d.state = ActorState::BUSY;
        record_event("ACQUIRE", r->id, id, 0);
      }
      r->phase = Phase::RUNNING;
      ++running;
      to_start.push_back(r);
    }
    for (const auto& r : to_finalize) r->finalizing = true;
    cv_.notify_all();
  }
  for (auto& r : to_start) spawn(std::thread([this, r] { dispatch_loop(r); }));
  for (auto& r : to_finalize) spawn(std::thread([this, r] { finalize(r); }));
}

void Server::dispatch_loop(std::shared_ptr<Run> run) {
  const auto timeout = Millis(static_cast<std::int64_t>(std::ceil(run->config.action_timeout * 1000.0)));
  std::unique_lock lk(mu_);
  for (std::size_t i = 0; i < run->plan.steps.size(); ++i) {
    if (stopping_) return;
    auto skip_rest = [&](std::size_t from) {
      for (std::size_t k = from; k < run->steps.size(); ++k) run->steps[k].verdict = Verdict::SKIPPED;
    };
    if (run->abort_requested) {
      skip_rest(i);
      run->phase = Phase::ABORTED;
      break;
    }
    const auto& ps = run->plan.steps[i];
    auto& outcome = run->steps[i];
    const auto& actor_id = outcome.actor;
    auto peer_it = peers_.find(actor_id);
    auto& desc = registry_[actor_id];
    const auto t0 = std::chrono::steady_clock::now();

    if (desc.state == ActorState::OFFLINE || peer_it == peers_.end()) {
      outcome.verdict = Verdict::ERROR;
      outcome.detail = {{"message", "actor " + actor_id + " offline"}, {"kind", "offline"}};
    } else {
      auto conn = peer_it->second->conn;
      Json params = script::to_json(ps.params);
      if (ps.ai) params["ai"] = *ps.ai;
      Json payload{{"run_id", run->id},
                   {"step_index", i},
                   {"keyword", ps.keyword},
                   {"params", params},
                   {"run_seed", run->config.run_seed},
                   {"sut_endpoint", run->config.sut_endpoint},
                   {"timeout_ms", timeout.count()}};
      run->involved.insert(actor_id);
      record_event("DISPATCH", run->id, actor_id, i);
      lk.unlock();
      bool sent = true;
      try {
        conn->send(wire::make(MsgType::DISPATCH_STEP, std::move(payload), run->id));
      } catch (const std::exception&) {
        sent = false;
      }
      lk.lock();

      const auto deadline = std::chrono::steady_clock::now() + timeout;
      std::optional<wire::WireMessage> result;
      enum { Waiting, Got, Offline, Aborted, TimedOut } why = Waiting;
      if (!sent) why = Offline;
      while (why == Waiting) {
        for (auto it = run->mailbox.begin(); it != run->mailbox.end();) {
          if (it->second.type == MsgType::STEP_RESULT && it->first == actor_id &&
              it->second.payload["step_index"].get<std::size_t>() == i) {
            result = it->second;
            it = run->mailbox.erase(it);
            break;
          }
          if (it->second.type == MsgType::STEP_RESULT)
            it = run->mailbox.erase(it);  // stale result of an earlier, timed-out step
          else
            ++it;
        }
        if (result) {
          why = Got;
          break;
        }
        if (stopping_) return;
        if (registry_[actor_id].state == ActorState::OFFLINE) {
          why = Offline;
          break;
        }
        if (run->abort_requested) {
          why = Aborted;
          break;
        }
        if (cv_.wait_until(lk, deadline) == std::cv_status::timeout && std::chrono::steady_clock::now() >= deadline)
          why = TimedOut;
      }
      record_event("RESULT", run->id, actor_id, i);

      auto cancel_step = [&] {
        auto p = peers_.find(actor_id);
        if (p == peers_.end()) return;
        auto c = p->second->conn;
        lk.unlock();
        try {
          c->send(wire::make(MsgType::ABORT, Json{{"run_id", run->id}, {"step_index", i}}, run->id));
        } catch (const std::exception&) {
        }
        lk.lock();
      };

      switch (why) {
        case Got: {
          const auto& p = result->payload;
          outcome.verdict = report::parse_verdict(p["verdict"].get<std::string>());
          outcome.detail = p.value("detail", Json::object());
          if (!outcome.detail.is_object()) outcome.detail = Json{{"value", outcome.detail}};
          if (p.contains("samples") && p["samples"].is_array())
            for (const auto& s : p["samples"]) {
              try {
                run->samples.push_back({i, actor_id, s.at("ue").get<std::string>(), s.at("data_rate").get<double>(),
                                        s.at("latency").get<double>(), s.at("packet_loss").get<double>()});
              } catch (const std::exception&) {
              }
            }
          if (outcome.detail.contains("trace") && outcome.detail["trace"].is_object()) {
            const auto& t = outcome.detail["trace"];
            run->trace_refs.push_back({t.value("id", std::string()), actor_id, i, t.value("method", std::string()),
                                       t.value("digest", std::string()), t.value("summary", Json::object())});
          }
          break;
        }
        case Offline:
          outcome.verdict = Verdict::ERROR;
          outcome.detail = {{"message", "actor " + actor_id + " went offline"}, {"kind", "offline"}};
          break;
        case Aborted:
          outcome.verdict = Verdict::SKIPPED;
          outcome.detail = {{"message", "aborted"}};
          cancel_step();
          break;
        case TimedOut:
          outcome.verdict = Verdict::ERROR;
          outcome.detail = {{"message", "step timed out after " + std::to_string(timeout.count()) + " ms"},
                            {"kind", "timeout"}};
          cancel_step();
          break;
        case Waiting:
          break;
      }
    }
    outcome.duration_ms =
        std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - t0).count();
    run->cursor = i + 1;
    cv_.notify_all();

    if (outcome.verdict == Verdict::SKIPPED && run->abort_requested) {
      skip_rest(i + 1);
      run->phase = Phase::ABORTED;
      break;
    }
    if (outcome.verdict == Verdict::ERROR && run->halt_on_error) {
      skip_rest(i + 1);
      run->cursor = run->plan.steps.size();
      break;
    }
  }
  if (run->phase == Phase::RUNNING) {
    run->phase = run->abort_requested && run->cursor < run->plan.steps.size() ? Phase::ABORTED : Phase::COMPLETE;
  }
  run->finalizing = true;
  cv_.notify_all();
  lk.unlock();
  finalize(run);
}

void Server::finalize(const std::shared_ptr<Run>& run) {
  std::unique_lock lk(mu_);
  // Ask every involved actor for its manifest.
  std::map<std::string, bool> pending;
  for (const auto& id : run->involved) {
    auto p = peers_.find(id);
    if (p == peers_.end()) continue;
    pending[id] = true;
    auto c = p->second->conn;
    lk.unlock();
    try {
      c->send(wire::make(MsgType::RUN_COMPLETE, Json{{"run_id", run->id}}, run->id));
    } catch (const std::exception&) {
    }
    lk.lock();
  }
  std::map<std::string, Json> manifests;
  const auto deadline = std::chrono::steady_clock::now() + opts_.collect_timeout;
  for (;;) {
    for (auto it = run->mailbox.begin(); it != run->mailbox.end();) {
      if (it->second.type == MsgType::RUN_COMPLETE) {
        manifests[it->first] = it->second.payload;
        it = run->mailbox.erase(it);
      } else {
        ++it;
      }
    }
    bool waiting = false;
    for (const auto& [id, _] : pending) {
      auto r = registry_.find(id);
      if (!manifests.count(id) && r != registry_.end() && r->second.state != ActorState::OFFLINE) waiting = true;
    }
    if (!waiting || stopping_) break;
    if (cv_.wait_until(lk, deadline) == std::cv_status::timeout) break;
  }

  report::RunRecord rec;
  rec.run_id = run->id;
  rec.submitted_at = run->submitted_at;
  rec.script = run->script_text;
  rec.script_hash = sha256_hex(run->script_text);
  rec.config = run->config_text;
  rec.config_hash = sha256_hex(run->config_text);
  rec.run_seed = run->config.run_seed;
  rec.mode = std::string(script::to_string(run->script.mode));
  rec.phase = std::string(to_string(run->phase));
  rec.setup_findings = run->findings;
  rec.steps = run->steps;
  rec.samples = run->samples;
  rec.traces = run->trace_refs;
  rec.replay_of = run->replay_of;
  for (const auto& id : run->involved) {
    auto m = manifests.find(id);
    if (m == manifests.end()) {
      rec.missing_actors.push_back(id);
      continue;
    }
    auto v = m->second.value("sut_version", std::string());
    if (!v.empty()) rec.sut_versions[id] = v;
    if (m->second.contains("traces") && m->second["traces"].is_array())
      for (const auto& t : m->second["traces"]) {
        auto tid = t.value("id", std::string());
        if (!run->trace_docs.count(tid) && std::find(rec.missing_actors.begin(), rec.missing_actors.end(), id) == rec.missing_actors.end())
          rec.missing_actors.push_back(id);
      }
  }
  for (const auto& t : rec.traces) {
    auto d = run->trace_docs.find(t.id);
    if (d != run->trace_docs.end()) rec.trace_docs[t.id] = d->second;
  }
  rec.complete = rec.missing_actors.empty();
  rec.kpi = report::summarize(rec.steps, rec.samples);
  lk.unlock();

  if (rec.replay_of && store_.exists(*rec.replay_of)) {
    try {
      auto orig = store_.load(*rec.replay_of);
      rec.sut_version_mismatch = orig.sut_versions != rec.sut_versions;
    } catch (const std::exception& e) {
      spdlog::warn("server: cannot load replayed run {}: {}", *rec.replay_of, e.what());
    }
  }
  try {
    store_.store(rec);
  } catch (const std::exception& e) {
    spdlog::error("server: storing run {} failed: {}", rec.run_id, e.what());
  }

  lk.lock();
  for (const auto& id : run->actor_ids) {
    auto it = registry_.find(id);
    if (it == registry_.end() || it->second.current_run != run->id) continue;
    it->second.current_run.reset();
    if (it->second.state == ActorState::BUSY) it->second.state = ActorState::IDLE;
    record_event("RELEASE", run->id, id, 0);
  }
  run->record = std::move(rec);
  cv_.notify_all();
  lk.unlock();
  spdlog::info("server: run {} finished: {}", run->id, to_string(run->phase));
  schedule();
}

RunSnapshot Server::snapshot_locked(const Run& r) const {
  RunSnapshot s;
  s.run_id = r.id;
  s.phase = r.phase;
  if (terminal(r.phase) && !r.record) s.phase = Phase::RUNNING;  // results still being collected
  s.cursor = r.cursor;
  s.plan_size = r.plan.steps.size();
  for (std::size_t i = 0; i < r.steps.size(); ++i)
    s.verdicts.push_back(i < r.cursor || terminal(s.phase) ? std::string(report::to_string(r.steps[i].verdict)) : "-");
  s.findings = r.findings;
  for (const auto& id : r.actor_ids) {
    auto it = registry_.find(id);
    if (it != registry_.end()) {
      s.actors.push_back(it->second);
    } else {
      ActorDescriptor d;
      d.id = id;
      s.actors.push_back(d);
    }
  }
  s.submitted_at = r.submitted_at;
  return s;
}

RunSnapshot Server::status(const std::string& run_id) const {
  std::lock_guard lk(mu_);
  auto r = find_run_locked(run_id);
  if (!r) throw UnknownRun(run_id);
  return snapshot_locked(*r);
}

std::vector<RunSnapshot> Server::list() const {
  std::lock_guard lk(mu_);
  std::vector<RunSnapshot> out;
  for (auto it = runs_.rbegin(); it != runs_.rend(); ++it) out.push_back(snapshot_locked(**it));
  return out;
}

void Server::abort(const std::string& run_id) {
  {
    std::lock_guard lk(mu_);
    auto r = find_run_locked(run_id);
    if (!r) throw UnknownRun(run_id);
    if (terminal(r->phase)) return;
    r->abort_requested = true;
    cv_.notify_all();
  }
  schedule();
}

bool Server::wait_terminal(const std::string& run_id, Millis timeout) const {
  std::unique_lock lk(mu_);
  auto r = find_run_locked(run_id);
  if (!r) throw UnknownRun(run_id);
  return cv_.wait_for(lk, timeout, [&] { return r->record.has_value(); });
}

report::RunRecord Server::collect_results(const std::string& run_id) const {
  std::unique_lock lk(mu_);
  auto r = find_run_locked(run_id);
  if (!r) throw UnknownRun(run_id);
  if (!r->record) throw Error("NOT_TERMINAL", "run " + run_id + " has not finished");
  if (!r->record->complete) throw PartialCollection(r->record->missing_actors);
  return *r->record;
}

// ---------------------------------------------------------------- control port

void Server::control_accept_loop() {
  while (!stopping_) {
    std::optional<net::Socket> s;
    try {
      s = control_listener_->accept(Millis(100));
    } catch (const std::exception& e) {
      if (!stopping_) spdlog::error("server: control accept failed: {}", e.what());
      continue;
    }
    if (!s) continue;
    auto conn = std::make_shared<wire::Connection>(std::move(*s));
    {
      std::lock_guard lk(threads_mu_);
      if (stopping_) break;
      live_.push_back(conn);
    }
    spawn(std::thread([this, conn] { serve_control(conn); }));
  }
}

void Server::serve_control(std::shared_ptr<wire::Connection> conn) {
  while (!stopping_) {
    std::optional<wire::WireMessage> m;
    try {
      m = conn->receive(Millis(200));
    } catch (const VersionError& e) {
      try {
        conn->send(wire::make_error("UNSUPPORTED_VERSION", e.what()));
      } catch (const std::exception&) {
      }
      break;
    } catch (const std::exception&) {
      break;
    }
    if (!m) continue;
    wire::WireMessage reply;
    try {
      switch (m->type) {
        case MsgType::SUBMIT: {
          std::optional<std::string> replay_of;
          if (m->payload.contains("replay_of") && m->payload["replay_of"].is_string())
            replay_of = m->payload["replay_of"].get<std::string>();
          auto id = submit(m->payload["script"].get<std::string>(), m->payload["config"].get<std::string>(), replay_of);
          reply = wire::make(MsgType::REPLY, Json{{"run_id", id}}, id);
          break;
        }
        case MsgType::STATUS: {
          auto id = m->run_id ? *m->run_id : m->payload.value("run_id", std::string());
          reply = wire::make(MsgType::REPLY, to_json(status(id)), id);
          break;
        }
        case MsgType::LIST: {
          Json runs = Json::array(), actors = Json::array();
          for (const auto& s : list()) runs.push_back(to_json(s));
          for (const auto& a : this->actors()) actors.push_back(to_json(a));
          reply = wire::make(MsgType::REPLY, Json{{"runs", runs}, {"actors", actors}});
          break;
        }
        case MsgType::ABORT:
          abort(*m->run_id);
          reply = wire::make(MsgType::REPLY, Json{{"ok", true}}, m->run_id);
          break;
        default:
          reply = wire::make_error("UNEXPECTED", "control port accepts SUBMIT, STATUS, LIST and ABORT");
      }
    } catch (const RejectedError& e) {
      reply = wire::make_error("REJECTED", e.what(), e.run_id);
      reply.payload["reasons"] = e.reasons;
    } catch (const Error& e) {
      reply = wire::make_error(e.code(), e.what(), m->run_id);
    } catch (const std::exception& e) {
      reply = wire::make_error("INTERNAL", e.what(), m->run_id);
    }
    try {
      conn->send(std::move(reply));
    } catch (const std::exception&) {
      break;
    }
  }
  conn->shutdown();
}

}  // namespace ait::server
