#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ait/aicore.hpp"
#include "ait/clock.hpp"
#include "ait/net.hpp"
#include "ait/report.hpp"
#include "ait/wire.hpp"

namespace ait::actor {

enum class ProbeMode { Real, Simulated };

struct ActorRuntimeConfig {
  std::string id;
  net::Endpoint server{"127.0.0.1", 7700};
  net::Endpoint sut{"127.0.0.1", 7800};
  std::string address;  // advertised; defaults to "local"
  Millis health_period{2000};
  ProbeMode probe = ProbeMode::Simulated;
  wire::HealthSnapshot simulated{10, 20, 30, true, 0, 0};
  Millis backoff_cap{30000};
  /// Give up dialing after this many failed attempts (nullopt: never).
  std::optional<std::size_t> max_connect_attempts;
  Millis connect_timeout{2000};
  Millis sut_timeout{5000};
  Millis status_period{1000};
};

/// Throws ConfigError for an empty id or a non-positive health period.
void validate(const ActorRuntimeConfig& cfg);

/// Best-effort host probe from /proc and statvfs; percentages clamped to [0,100].
wire::HealthSnapshot probe_real();

/// Calls `attempt` until it returns true, sleeping on `clock` between
/// failures: initial, 2*initial, ... capped at `cap`. Returns the delays
/// slept. Throws AdapterError{"refused"} after `max_attempts` failures and
/// stops early (returning) when `stop` becomes true.
std::vector<Millis> retry_with_backoff(const std::function<bool()>& attempt, Millis initial, Millis cap, Clock& clock,
                                       std::optional<std::size_t> max_attempts, const std::atomic<bool>* stop = nullptr);

/// Client side of the SUT link.
class Adapter {
 public:
  virtual ~Adapter() = default;
  /// One request/response exchange. Throws AdapterError.
  virtual Json call(const std::string& op, const Json& body) = 0;
  /// Wall time of the last exchange.
  virtual double last_latency_ms() const = 0;
};

/// Speaks SUT_REQUEST/SUT_RESPONSE to the bundled SUT (or anything that
/// implements the same ops). Connects lazily, reconnects after faults.
class SimAdapter final : public Adapter {
 public:
  SimAdapter(net::Endpoint ep, Millis timeout, Millis connect_timeout = Millis(2000));
  Json call(const std::string& op, const Json& body) override;
  double last_latency_ms() const override { return latency_ms_; }

 private:
  net::Endpoint ep_;
  Millis timeout_;
  Millis connect_timeout_;
  std::unique_ptr<wire::Connection> conn_;
  double latency_ms_ = 0;
};

/// Hardware path placeholder: every call fails with AdapterError{"unsupported"}.
class SdrAdapter final : public Adapter {
 public:
  Json call(const std::string& op, const Json& body) override;
  double last_latency_ms() const override { return 0; }
};

struct StepRequest {
  std::string run_id;
  std::size_t step_index = 0;
  std::string keyword;
  Json params = Json::object();  // scalars plus the optional "ai" map
  std::uint64_t run_seed = 0;
};

struct StepReport {
  report::Verdict verdict = report::Verdict::ERROR;
  Json detail = Json::object();
  std::vector<report::KpiSample> samples;
  std::optional<aicore::ExplorationTrace> trace;
};

/// Keyword interpreter with per-run context (last SUT response, configured
/// impairments). Never throws: faults become ERROR reports.
class Executor {
 public:
  using AdapterFactory = std::function<std::unique_ptr<Adapter>(const std::optional<std::string>& endpoint)>;
  Executor(std::string actor_id, AdapterFactory factory);

  StepReport execute(const StepRequest& req, const std::atomic<bool>& cancel);
  /// Drops the run context and returns the SUT version it observed ("" if none).
  std::string finish_run(const std::string& run_id);

 private:
  struct RunContext {
    std::unique_ptr<Adapter> adapter;
    std::optional<std::string> endpoint;
    std::optional<Json> last_response;
    std::vector<aicore::Impairment> impairments;
    std::string sut_version;
  };
  StepReport run(const StepRequest& req, RunContext& ctx, const std::atomic<bool>& cancel);
  Adapter& adapter(RunContext& ctx, const Json& params);

  std::string id_;
  AdapterFactory factory_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<RunContext>> runs_;
};

/// Actor process: dials the server, registers, pushes health reports,
/// executes dispatched steps one at a time and answers RUN_COMPLETE with a
/// manifest of the traces it produced.
class Actor {
 public:
  explicit Actor(ActorRuntimeConfig cfg, Clock& clock = SteadyClock::instance());
  ~Actor();
  Actor(const Actor&) = delete;
  Actor& operator=(const Actor&) = delete;

  /// Blocks until registered once. Throws AdapterError if the server stays
  /// unreachable past max_connect_attempts, HandshakeRejected on refusal.
  void start();
  void stop();
  /// Abrupt death: drops the connection without any goodbye and stops.
  void kill();
  /// Blocks until the actor stops.
  void wait();
  bool registered() const { return registered_.load(); }

  /// Fault hook: die instead of answering RUN_COMPLETE.
  void die_on_run_complete(bool on) { die_on_complete_ = on; }
  /// Largest number of concurrently executing steps observed.
  std::size_t max_active_steps() const { return max_active_.load(); }
  /// Number of HEALTH_REPORT messages sent.
  std::size_t health_reports_sent() const { return health_sent_.load(); }

 private:
  void session_loop();
  bool connect_once();
  void serve();
  void health_loop(std::shared_ptr<wire::Connection> conn);
  void worker_loop();
  void on_dispatch(const wire::WireMessage& m);
  void send(wire::WireMessage m);
  wire::HealthSnapshot snapshot() const;

  ActorRuntimeConfig cfg_;
  Clock& clock_;
  Executor exec_;

  std::atomic<bool> stop_{false};
  std::atomic<bool> killed_{false};
  std::atomic<bool> registered_{false};
  std::atomic<bool> die_on_complete_{false};
  std::atomic<std::size_t> active_{0};
  std::atomic<std::size_t> max_active_{0};
  std::atomic<std::size_t> health_sent_{0};

  std::mutex conn_mu_;
  std::shared_ptr<wire::Connection> conn_;
  std::condition_variable registered_cv_;
  std::optional<std::string> start_error_;
  std::exception_ptr start_exc_;

  std::mutex work_mu_;
  std::condition_variable work_cv_;
  std::optional<StepRequest> pending_;
  bool busy_ = false;
  std::optional<std::pair<std::string, std::size_t>> current_;
  std::atomic<bool> cancel_{false};
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> run_traces_;  // run -> (id, digest)

  std::thread session_thread_;
  std::thread worker_thread_;
  std::mutex done_mu_;
  std::condition_variable done_cv_;
  bool done_ = false;
};

}  // namespace ait::actor
