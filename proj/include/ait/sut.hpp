#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ait/canonical.hpp"
#include "ait/impairment.hpp"
#include "ait/net.hpp"
#include "ait/wire.hpp"

namespace ait::sut {

inline constexpr std::string_view kSutVersion = "ait-sut/1.0";

// ---- near-RT scheduler xApp ----

struct SchedulerRequest {
  std::vector<std::int64_t> ue_demands;  // PRBs arriving per TTI
  std::vector<double> priorities;
  std::int64_t capacity = 0;  // PRBs per TTI
  std::int64_t tti_count = 1;
};

struct UeKpi {
  double throughput_frac = 0;    // served / offered
  double mean_latency_ttis = 0;  // mean queueing delay of served PRBs
  double loss_frac = 0;          // still queued at the horizon / offered
};

struct SchedulerResponse {
  std::vector<std::vector<std::int64_t>> allocations;  // [tti][ue]
  std::vector<UeKpi> kpi;
  double qos_score = 0;
};

/// Throws SchemaError.
SchedulerRequest parse_scheduler_request(const Json& j);
Json to_json(const SchedulerRequest& r);
Json to_json(const SchedulerResponse& r);

/// Weighted proportional share with water-filling over one TTI: weights
/// are `weights`, no UE receives more than its queue, largest-remainder
/// rounding with ties to the lowest index.
std::vector<std::int64_t> allocate_tti(std::span<const std::int64_t> queued, std::span<const double> weights,
                                       std::int64_t capacity);

/// Runs the FIFO-queued scheduler for tti_count TTIs. Deterministic.
SchedulerResponse schedule(const SchedulerRequest& req);

// ---- demodulator classifier ----

enum class Constellation { QPSK, QAM16 };
enum class Classifier { MinDistance, Perceptron };

using aicore::Complex;

/// QPSK: (+,+), (-,+), (-,-), (+,-) at radius 1 (index advances by one per
/// pi/2 rotation). 16QAM: index 4*row + col over levels {-3,-1,1,3}/sqrt(10).
std::span<const Complex> constellation_points(Constellation c);
double min_point_distance(Constellation c);

struct Decision {
  int index = 0;
  double confidence = 0;
};

/// Nearest point (Euclidean, ties to lowest index); confidence
/// (d2 - d1) / (d2 + d1).
Decision decide_min_distance(Constellation c, Complex symbol);

struct DemodRequest {
  Constellation constellation = Constellation::QPSK;
  Classifier classifier = Classifier::MinDistance;
  /// Explicit received symbols. If empty, symbols are generated from
  /// true_indices (or `count` seeded random indices), impairments and noise.
  std::vector<Complex> symbols;
  std::vector<int> true_indices;
  std::size_t count = 0;
  std::vector<aicore::Impairment> impairments;
  double noise_sigma = 0;  // per component
  std::uint64_t seed = 0;
};

struct DemodResponse {
  std::vector<int> decided_indices;
  std::optional<double> symbol_error_rate;  // present when truth is known
  double mean_confidence = 0;
};

DemodRequest parse_demod_request(const Json& j);
Json to_json(const DemodResponse& r);

/// Received symbols for a request (explicit or generated).
std::vector<Complex> received_symbols(const DemodRequest& req, std::vector<int>& truth);
DemodResponse demodulate(const DemodRequest& req);

// ---- service + socket server ----

/// Request dispatcher holding per-cell scheduler session state.
/// Ops: schedule, demodulate, attach, detach, set_demand, run_cell,
/// cell_status, version.
class SutService {
 public:
  /// Throws SchemaError on bad requests or unknown ops.
  Json handle(const std::string& op, const Json& body);

 private:
  struct Ue {
    std::string id;
    double priority = 1;
    std::int64_t demand = 0;
  };
  struct Cell {
    std::vector<Ue> ues;  // attach order
  };
  std::mutex mu_;
  std::map<std::string, Cell> cells_;
};

class SutServer {
 public:
  explicit SutServer(const net::Endpoint& bind);
  ~SutServer();
  SutServer(const SutServer&) = delete;
  SutServer& operator=(const SutServer&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  void stop();

 private:
  void accept_loop();
  void serve_connection(std::shared_ptr<wire::Connection> conn);

  net::Listener listener_;
  SutService service_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::vector<std::thread> conn_threads_;
  std::vector<std::shared_ptr<wire::Connection>> live_;
};

}  // namespace ait::sut
