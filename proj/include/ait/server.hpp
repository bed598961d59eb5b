#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ait/clock.hpp"
#include "ait/net.hpp"
#include "ait/report.hpp"
#include "ait/script.hpp"
#include "ait/wire.hpp"

namespace ait::server {

enum class ActorState { IDLE, BUSY, OFFLINE };
enum class Phase { QUEUED, RUNNING, COMPLETE, ABORTED, FAILED_SETUP };
std::string_view to_string(ActorState s);
std::string_view to_string(Phase p);
bool terminal(Phase p);

struct ActorDescriptor {
  std::string id;
  std::string address;
  ActorState state = ActorState::OFFLINE;
  std::optional<wire::HealthSnapshot> last_health;
  std::optional<std::string> current_run;
  Millis health_period{2000};
  Millis last_seen{0};
};
Json to_json(const ActorDescriptor& a);

struct ServerOptions {
  net::Endpoint actor_bind{"127.0.0.1", 7700};
  net::Endpoint control_bind{"127.0.0.1", 7701};
  std::filesystem::path store_root = "ait-store";
  std::uint32_t max_parallel_runs = 4;
  Millis setup_timeout{30000};
  Millis register_timeout{5000};
  /// How long collection waits for each actor's RUN_COMPLETE manifest.
  Millis collect_timeout{5000};
  /// Background liveness + admission tick. Tests driving a FakeClock turn
  /// it off and call check_liveness()/schedule() themselves.
  bool housekeeping = true;
  Millis housekeeping_period{100};
  std::size_t missed_reports = 3;
};

struct RunSnapshot {
  std::string run_id;
  Phase phase = Phase::QUEUED;
  std::size_t cursor = 0;
  std::size_t plan_size = 0;
  std::vector<std::string> verdicts;
  std::vector<std::string> findings;
  std::vector<ActorDescriptor> actors;
  std::int64_t submitted_at = 0;
};
Json to_json(const RunSnapshot& s);

/// Ordered orchestration event, for invariant checks.
struct LogEntry {
  std::uint64_t seq = 0;
  std::string event;  // ACQUIRE, RELEASE, DISPATCH, RESULT
  std::string run_id;
  std::string actor;
  std::size_t step = 0;
};

class Server {
 public:
  explicit Server(ServerOptions opts, Clock& clock = SteadyClock::instance());
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds both ports and starts serving. Throws IoError.
  void start();
  void stop();
  std::uint16_t actor_port() const;
  std::uint16_t control_port() const;

  /// Validates, expands and queues. Scripts with findings or mode SDR are
  /// recorded as FAILED_SETUP and RejectedError is thrown.
  std::string submit(const std::string& script_text, const std::string& config_text,
                     std::optional<std::string> replay_of = std::nullopt);
  /// Throws UnknownRun.
  RunSnapshot status(const std::string& run_id) const;
  /// Newest first.
  std::vector<RunSnapshot> list() const;
  /// Throws UnknownRun. No effect on terminal runs.
  void abort(const std::string& run_id);
  /// Blocks until the run is terminal and its record is stored. False on timeout.
  bool wait_terminal(const std::string& run_id, Millis timeout) const;
  /// The stored record of a terminal run; same value on every call. Throws
  /// UnknownRun, Error{"NOT_TERMINAL"}, or PartialCollection (the record is
  /// still stored, flagged incomplete).
  report::RunRecord collect_results(const std::string& run_id) const;

  std::vector<ActorDescriptor> actors() const;
  std::optional<ActorDescriptor> actor(const std::string& id) const;
  /// Marks actors OFFLINE after `missed_reports` silent health periods.
  void check_liveness();
  /// Admits queued runs whose actors are free, up to the parallel limit.
  void schedule();
  std::vector<LogEntry> log() const;
  report::RunStore& store() { return store_; }

 private:
  struct Run;
  struct Peer;

  void actor_accept_loop();
  void control_accept_loop();
  void serve_actor(std::shared_ptr<wire::Connection> conn);
  void serve_control(std::shared_ptr<wire::Connection> conn);
  void housekeeping_loop();
  void dispatch_loop(std::shared_ptr<Run> run);
  void finalize(const std::shared_ptr<Run>& run);
  void record_event(const std::string& event, const std::string& run, const std::string& actor, std::size_t step);
  void mark_offline_locked(const std::string& id);
  std::shared_ptr<Run> find_run_locked(const std::string& id) const;
  RunSnapshot snapshot_locked(const Run& r) const;
  void route_locked(const std::string& actor_id, const wire::WireMessage& m);
  void spawn(std::thread t);

  ServerOptions opts_;
  Clock& clock_;
  report::RunStore store_;
  std::unique_ptr<net::Listener> actor_listener_;
  std::unique_ptr<net::Listener> control_listener_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, ActorDescriptor> registry_;
  std::map<std::string, std::shared_ptr<Peer>> peers_;
  std::vector<std::shared_ptr<Run>> runs_;  // submission order
  std::vector<LogEntry> log_;
  std::uint64_t log_seq_ = 0;

  std::atomic<bool> stopping_{false};
  std::vector<std::thread> threads_;
  std::mutex threads_mu_;
  std::vector<std::shared_ptr<wire::Connection>> live_;
};

}  // namespace ait::server
