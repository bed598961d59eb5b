#include "ait/sut.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>

#include "ait/error.hpp"

namespace ait::sut {

namespace {

std::int64_t get_int(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer()) throw SchemaError(std::string(key) + " must be an integer");
  return j[key].get<std::int64_t>();
}

double get_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw SchemaError(std::string(key) + " must be a number");
  return j[key].get<double>();
}

std::string get_string(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw SchemaError(std::string(key) + " must be a string");
  return j[key].get<std::string>();
}

Constellation parse_constellation(const std::string& s) {
  if (s == "QPSK") return Constellation::QPSK;
  if (s == "16QAM") return Constellation::QAM16;
  throw SchemaError("constellation must be QPSK or 16QAM");
}

const std::array<Complex, 4>& qpsk() {
  static const double a = 1.0 / std::sqrt(2.0);
  static const std::array<Complex, 4> pts{Complex(a, a), Complex(-a, a), Complex(-a, -a), Complex(a, -a)};
  return pts;
}

const std::array<Complex, 16>& qam16() {
  static const std::array<Complex, 16> pts = [] {
    std::array<Complex, 16> p{};
    const double levels[4] = {-3, -1, 1, 3};
    const double norm = std::sqrt(10.0);
    for (int row = 0; row < 4; ++row)
      for (int col = 0; col < 4; ++col) p[4 * row + col] = Complex(levels[col] / norm, levels[row] / norm);
    return p;
  }();
  return pts;
}

// Multiclass perceptron on features [I, Q, 1]; trained once per
// constellation from seeded noisy samples.
struct PerceptronModel {
  std::vector<std::array<double, 3>> w;
};

const PerceptronModel& perceptron(Constellation c) {
  static std::mutex mu;
  static std::map<Constellation, PerceptronModel> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(c); it != cache.end()) return it->second;

  auto pts = constellation_points(c);
  const std::size_t k = pts.size();
  auto rng = CounterRng::from_seed(0xA17C0DEULL + static_cast<std::uint64_t>(c));
  std::vector<std::pair<std::array<double, 3>, std::size_t>> data;
  for (std::size_t n = 0; n < 200; ++n)
    for (std::size_t cls = 0; cls < k; ++cls) {
      auto s = pts[cls] + Complex(0.12 * rng.normal(), 0.12 * rng.normal());
      data.push_back({{s.real(), s.imag(), 1.0}, cls});
    }
  std::vector<std::array<double, 3>> w(k, {0, 0, 0}), acc(k, {0, 0, 0});
  std::size_t steps = 0;
  for (int epoch = 0; epoch < 30; ++epoch) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& [x, y] = data[(i * 7919 + static_cast<std::size_t>(epoch) * 104729) % data.size()];
      std::size_t best = 0;
      double best_s = -1e300;
      for (std::size_t cls = 0; cls < k; ++cls) {
        double s = w[cls][0] * x[0] + w[cls][1] * x[1] + w[cls][2] * x[2];
        if (s > best_s) {
          best_s = s;
          best = cls;
        }
      }
      if (best != y)
        for (int d = 0; d < 3; ++d) {
          w[y][d] += x[d];
          w[best][d] -= x[d];
        }
      for (std::size_t cls = 0; cls < k; ++cls)
        for (int d = 0; d < 3; ++d) acc[cls][d] += w[cls][d];
      ++steps;
    }
  }
  PerceptronModel m;
  m.w = acc;
  for (auto& row : m.w)
    for (auto& v : row) v /= static_cast<double>(steps);
  return cache.emplace(c, std::move(m)).first->second;
}

Decision decide_perceptron(Constellation c, Complex s) {
  const auto& m = perceptron(c);
  double s1 = -1e300, s2 = -1e300;
  int best = 0;
  for (std::size_t cls = 0; cls < m.w.size(); ++cls) {
    double v = m.w[cls][0] * s.real() + m.w[cls][1] * s.imag() + m.w[cls][2];
    if (v > s1) {
      s2 = s1;
      s1 = v;
      best = static_cast<int>(cls);
    } else if (v > s2) {
      s2 = v;
    }
  }
  double denom = std::abs(s1) + std::abs(s2);
  double conf = denom > 0 ? std::clamp((s1 - s2) / denom, 0.0, 1.0) : 0.0;
  return {best, conf};
}

}  // namespace

// ---------------------------------------------------------------- scheduler

SchedulerRequest parse_scheduler_request(const Json& j) {
  if (!j.is_object()) throw SchemaError("scheduler request must be an object");
  SchedulerRequest r;
  if (!j.contains("ue_demands") || !j["ue_demands"].is_array() || j["ue_demands"].empty())
    throw SchemaError("ue_demands must be a non-empty array");
  for (const auto& d : j["ue_demands"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 1) throw SchemaError("ue_demands must be positive integers");
    r.ue_demands.push_back(d.get<std::int64_t>());
  }
  if (j.contains("priorities")) {
    if (!j["priorities"].is_array()) throw SchemaError("priorities must be an array");
    for (const auto& p : j["priorities"]) {
      if (!p.is_number() || !(p.get<double>() > 0) || !std::isfinite(p.get<double>()))
        throw SchemaError("priorities must be positive numbers");
      r.priorities.push_back(p.get<double>());
    }
    if (r.priorities.size() != r.ue_demands.size()) throw SchemaError("priorities and ue_demands differ in length");
  } else {
    r.priorities.assign(r.ue_demands.size(), 1.0);
  }
  r.capacity = get_int(j, "capacity");
  if (r.capacity < 1) throw SchemaError("capacity must be >= 1");
  if (j.contains("tti_count")) r.tti_count = get_int(j, "tti_count");
  if (r.tti_count < 1 || r.tti_count > 100000) throw SchemaError("tti_count must be in [1, 100000]");
  return r;
}

Json to_json(const SchedulerRequest& r) {
  return {{"ue_demands", r.ue_demands}, {"priorities", r.priorities}, {"capacity", r.capacity}, {"tti_count", r.tti_count}};
}

Json to_json(const SchedulerResponse& r) {
  Json kpi = Json::array();
  for (const auto& k : r.kpi)
    kpi.push_back({{"throughput_frac", k.throughput_frac}, {"mean_latency_ttis", k.mean_latency_ttis}, {"loss_frac", k.loss_frac}});
  return {{"allocations", r.allocations}, {"kpi", kpi}, {"qos_score", r.qos_score}};
}

std::vector<std::int64_t> allocate_tti(std::span<const std::int64_t> queued, std::span<const double> weights,
                                       std::int64_t capacity) {
  const std::size_t n = queued.size();
  std::vector<std::int64_t> alloc(n, 0);
  std::int64_t remaining = capacity;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i)
    if (queued[i] > 0) active.push_back(i);

  while (remaining > 0 && !active.empty()) {
    double total = 0;
    for (auto i : active) total += weights[i];
    std::vector<std::int64_t> share(n, 0);
    std::vector<std::pair<double, std::size_t>> rema;
    std::int64_t handed = 0;
    for (auto i : active) {
      double quota = static_cast<double>(remaining) * weights[i] / total;
      double snapped = std::round(quota);
      if (std::abs(quota - snapped) < 1e-9) quota = snapped;
      auto fl = static_cast<std::int64_t>(std::floor(quota));
      share[i] = fl;
      handed += fl;
      // quantized so rationally equal remainders compare equal
      rema.push_back({std::round((quota - static_cast<double>(fl)) * 1e9), i});
    }
    std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::int64_t k = 0; k < remaining - handed; ++k) share[rema[static_cast<std::size_t>(k) % rema.size()].second] += 1;

    bool capped = false;
    std::vector<std::size_t> still;
    for (auto i : active) {
      auto room = queued[i] - alloc[i];
      auto grant = std::min(share[i], room);
      capped = capped || grant < share[i];
      alloc[i] += grant;
      remaining -= grant;
      if (alloc[i] < queued[i]) still.push_back(i);
    }
    active = std::move(still);
    if (!capped) break;
  }
  return alloc;
}

SchedulerResponse schedule(const SchedulerRequest& req) {
  if (req.ue_demands.empty() || req.priorities.size() != req.ue_demands.size() || req.capacity < 1 || req.tti_count < 1)
    throw SchemaError("malformed scheduler request");
  const std::size_t n = req.ue_demands.size();
  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) weights[i] = static_cast<double>(req.ue_demands[i]) * req.priorities[i];

  struct Batch {
    std::int64_t arrival;
    std::int64_t count;
  };
  std::vector<std::deque<Batch>> queues(n);
  std::vector<std::int64_t> queued(n, 0), served(n, 0), wait(n, 0);

  SchedulerResponse resp;
  for (std::int64_t t = 0; t < req.tti_count; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      queues[i].push_back({t, req.ue_demands[i]});
      queued[i] += req.ue_demands[i];
    }
    auto alloc = allocate_tti(queued, weights, req.capacity);
    for (std::size_t i = 0; i < n; ++i) {
      auto left = alloc[i];
      while (left > 0) {
        auto& head = queues[i].front();
        auto take = std::min(left, head.count);
        wait[i] += take * (t - head.arrival);
        head.count -= take;
        left -= take;
        if (head.count == 0) queues[i].pop_front();
      }
      served[i] += alloc[i];
      queued[i] -= alloc[i];
    }
    resp.allocations.push_back(std::move(alloc));
  }

  double weighted = 0, psum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double offered = static_cast<double>(req.ue_demands[i] * req.tti_count);
    UeKpi k;
    k.throughput_frac = static_cast<double>(served[i]) / offered;
    k.mean_latency_ttis = served[i] > 0 ? static_cast<double>(wait[i]) / static_cast<double>(served[i]) : 0.0;
    k.loss_frac = static_cast<double>(queued[i]) / offered;
    resp.kpi.push_back(k);
    weighted += req.priorities[i] * std::min(1.0, k.throughput_frac);
    psum += req.priorities[i];
  }
  resp.qos_score = weighted / psum;
  return resp;
}

// ---------------------------------------------------------------- demodulator

std::span<const Complex> constellation_points(Constellation c) {
  if (c == Constellation::QPSK) return qpsk();
  return qam16();
}

double min_point_distance(Constellation c) {
  return c == Constellation::QPSK ? std::sqrt(2.0) : 2.0 / std::sqrt(10.0);
}

Decision decide_min_distance(Constellation c, Complex symbol) {
  auto pts = constellation_points(c);
  double d1 = INFINITY, d2 = INFINITY;
  int best = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = std::norm(symbol - pts[i]);
    if (d < d1) {
      d2 = d1;
      d1 = d;
      best = static_cast<int>(i);
    } else if (d < d2) {
      d2 = d;
    }
  }
  d1 = std::sqrt(d1);
  d2 = std::sqrt(d2);
  return {best, (d2 - d1) / (d2 + d1)};
}

DemodRequest parse_demod_request(const Json& j) {
  if (!j.is_object()) throw SchemaError("demod request must be an object");
  DemodRequest r;
  r.constellation = parse_constellation(get_string(j, "constellation"));
  const int k = static_cast<int>(constellation_points(r.constellation).size());
  if (j.contains("classifier")) {
    auto c = get_string(j, "classifier");
    if (c == "min_distance")
      r.classifier = Classifier::MinDistance;
    else if (c == "perceptron")
      r.classifier = Classifier::Perceptron;
    else
      throw SchemaError("classifier must be min_distance or perceptron");
  }
  if (j.contains("symbols")) {
    if (!j["symbols"].is_array()) throw SchemaError("symbols must be an array of [re, im] pairs");
    for (const auto& s : j["symbols"]) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
        throw SchemaError("symbols must be an array of [re, im] pairs");
      Complex z(s[0].get<double>(), s[1].get<double>());
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw SchemaError("symbols must be finite");
      r.symbols.push_back(z);
    }
  }
  if (j.contains("true_indices")) {
    if (!j["true_indices"].is_array()) throw SchemaError("true_indices must be an array");
    for (const auto& t : j["true_indices"]) {
      if (!t.is_number_integer() || t.get<int>() < 0 || t.get<int>() >= k)
        throw SchemaError("true_indices outside constellation");
      r.true_indices.push_back(t.get<int>());
    }
  }
  if (j.contains("count")) {
    auto c = get_int(j, "count");
    if (c < 1 || c > 1'000'000) throw SchemaError("count must be in [1, 1000000]");
    r.count = static_cast<std::size_t>(c);
  }
  if (j.contains("impairments")) {
    if (!j["impairments"].is_array()) throw SchemaError("impairments must be an array");
    for (const auto& imp : j["impairments"]) {
      try {
        r.impairments.push_back(aicore::impairment_from_json(imp));
      } catch (const ConfigError& e) {
        throw SchemaError(e.what());
      }
    }
  }
  if (j.contains("noise_sigma")) {
    r.noise_sigma = get_number(j, "noise_sigma");
    if (!(r.noise_sigma >= 0)) throw SchemaError("noise_sigma must be >= 0");
  }
  if (j.contains("seed")) {
    if (!is_uint(j["seed"])) throw SchemaError("seed must be an unsigned integer");
    r.seed = j["seed"].get<std::uint64_t>();
  }
  if (!r.symbols.empty()) {
    if (!r.true_indices.empty() && r.true_indices.size() != r.symbols.size())
      throw SchemaError("true_indices and symbols differ in length");
  } else if (r.true_indices.empty() && r.count == 0) {
    throw SchemaError("need symbols, true_indices or count");
  } else if (!r.true_indices.empty() && r.count != 0 && r.count != r.true_indices.size()) {
    throw SchemaError("count disagrees with true_indices");
  }
  return r;
}

std::vector<Complex> received_symbols(const DemodRequest& req, std::vector<int>& truth) {
  truth = req.true_indices;
  auto pts = constellation_points(req.constellation);
  auto rng = CounterRng::from_seed(req.seed);
  std::vector<Complex> sym = req.symbols;
  if (sym.empty()) {
    if (truth.empty())
      for (std::size_t i = 0; i < req.count; ++i) truth.push_back(static_cast<int>(rng.below(pts.size())));
    for (int t : truth) sym.push_back(pts[static_cast<std::size_t>(t)]);
  }
  for (const auto& imp : req.impairments) sym = aicore::apply_impairment(sym, imp, rng);
  if (req.noise_sigma > 0)
    for (auto& s : sym) s += Complex(req.noise_sigma * rng.normal(), req.noise_sigma * rng.normal());
  return sym;
}

DemodResponse demodulate(const DemodRequest& req) {
  std::vector<int> truth;
  auto sym = received_symbols(req, truth);
  DemodResponse resp;
  double conf = 0;
  for (const auto& s : sym) {
    auto d = req.classifier == Classifier::MinDistance ? decide_min_distance(req.constellation, s)
                                                       : decide_perceptron(req.constellation, s);
    resp.decided_indices.push_back(d.index);
    conf += d.confidence;
  }
  resp.mean_confidence = sym.empty() ? 0.0 : conf / static_cast<double>(sym.size());
  if (!truth.empty()) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += truth[i] != resp.decided_indices[i];
    resp.symbol_error_rate = static_cast<double>(wrong) / static_cast<double>(truth.size());
  }
  return resp;
}

Json to_json(const DemodResponse& r) {
  Json j{{"decided_indices", r.decided_indices}, {"mean_confidence", r.mean_confidence}};
  if (r.symbol_error_rate) j["symbol_error_rate"] = *r.symbol_error_rate;
  return j;
}

// ---------------------------------------------------------------- service

Json SutService::handle(const std::string& op, const Json& body) {
  if (op == "schedule") return to_json(schedule(parse_scheduler_request(body)));
  if (op == "demodulate") return to_json(demodulate(parse_demod_request(body)));
  if (op == "version") return {{"version", kSutVersion}};

  if (!body.is_object()) throw SchemaError("body must be an object");
  auto cell_id = get_string(body, "cell");
  std::lock_guard lock(mu_);
  if (op == "attach") {
    auto ue = get_string(body, "ue");
    double prio = body.contains("priority") ? get_number(body, "priority") : 1.0;
    if (!(prio > 0)) throw SchemaError("priority must be > 0");
    std::int64_t demand = body.contains("demand") ? get_int(body, "demand") : 0;
    if (demand < 0) throw SchemaError("demand must be >= 0");
    auto& cell = cells_[cell_id];
    auto it = std::find_if(cell.ues.begin(), cell.ues.end(), [&](const Ue& u) { return u.id == ue; });
    if (it != cell.ues.end())
      *it = Ue{ue, prio, demand};  // re-attach resets the UE
    else
      cell.ues.push_back(Ue{ue, prio, demand});
    return {{"session_id", cell_id + "/" + ue}, {"ues", cell.ues.size()}};
  }
  auto it = cells_.find(cell_id);
  if (it == cells_.end()) throw SchemaError("unknown cell '" + cell_id + "'");
  auto& cell = it->second;
  auto find_ue = [&](const std::string& ue) -> Ue& {
    for (auto& u : cell.ues)
      if (u.id == ue) return u;
    throw SchemaError("ue '" + ue + "' not attached to cell '" + cell_id + "'");
  };
  if (op == "detach") {
    auto ue = get_string(body, "ue");
    find_ue(ue);
    std::erase_if(cell.ues, [&](const Ue& u) { return u.id == ue; });
    Json out{{"ues", cell.ues.size()}};
    if (cell.ues.empty()) cells_.erase(it);
    return out;
  }
  if (op == "set_demand") {
    auto d = get_int(body, "demand");
    if (d < 0) throw SchemaError("demand must be >= 0");
    find_ue(get_string(body, "ue")).demand = d;
    return {{"ok", true}};
  }
  if (op == "cell_status") {
    Json ues = Json::array();
    for (const auto& u : cell.ues) ues.push_back({{"ue", u.id}, {"priority", u.priority}, {"demand", u.demand}});
    return {{"ues", ues}};
  }
  if (op == "run_cell") {
    SchedulerRequest req;
    req.capacity = get_int(body, "capacity");
    req.tti_count = body.contains("tti_count") ? get_int(body, "tti_count") : 1;
    Json ids = Json::array();
    for (const auto& u : cell.ues) {
      if (u.demand < 1) throw SchemaError("ue '" + u.id + "' has no demand configured");
      req.ue_demands.push_back(u.demand);
      req.priorities.push_back(u.priority);
      ids.push_back(u.id);
    }
    auto out = to_json(schedule(parse_scheduler_request(to_json(req))));
    out["ues"] = ids;
    out["request"] = to_json(req);
    return out;
  }
  throw SchemaError("unknown op '" + op + "'");
}

SutServer::SutServer(const net::Endpoint& bind) : listener_(bind) {
  accept_thread_ = std::thread([this] { accept_loop(); });
}

SutServer::~SutServer() { stop(); }

void SutServer::stop() {
  if (stopping_.exchange(true)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  listener_.close();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conn_mu_);
    for (auto& c : live_) c->shutdown();
    threads.swap(conn_threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

void SutServer::accept_loop() {
  while (!stopping_) {
    auto sock = listener_.accept(std::chrono::milliseconds(100));
    if (!sock) continue;
    auto conn = std::make_shared<wire::Connection>(std::move(*sock));
    std::lock_guard lock(conn_mu_);
    live_.push_back(conn);
    conn_threads_.emplace_back([this, conn] { serve_connection(conn); });
  }
}

void SutServer::serve_connection(std::shared_ptr<wire::Connection> conn) {
  using wire::MsgType;
  while (!stopping_) {
    std::optional<wire::WireMessage> msg;
    try {
      msg = conn->receive(std::chrono::milliseconds(200));
    } catch (const wire::ConnectionClosed&) {
      break;
    } catch (const VersionError& e) {
      conn->send(wire::make_error("UNSUPPORTED_VERSION", e.what()));
      continue;
    } catch (const SchemaError& e) {
      try {
        conn->send(wire::make_error(e.code() == "SCHEMA" ? "MALFORMED" : e.code(), e.what()));
      } catch (const std::exception&) {
        break;
      }
      continue;
    } catch (const std::exception& e) {
      // Framing errors leave the stream unusable; drop only this connection.
      spdlog::debug("sut: dropping connection: {}", e.what());
      try {
        conn->send(wire::make_error("FRAME", e.what()));
      } catch (const std::exception&) {
      }
      break;
    }
    if (!msg) continue;
    try {
      if (msg->type != MsgType::SUT_REQUEST) {
        conn->send(wire::make_error("UNEXPECTED", "SUT only answers SUT_REQUEST", msg->run_id));
        continue;
      }
      auto op = msg->payload["op"].get<std::string>();
      Json reply;
      try {
        reply = {{"op", op}, {"body", service_.handle(op, msg->payload["body"])}, {"in_reply_to", msg->seq}};
      } catch (const SchemaError& e) {
        conn->send(wire::make_error("MALFORMED", e.what(), msg->run_id));
        continue;
      }
      conn->send(wire::make(MsgType::SUT_RESPONSE, std::move(reply), msg->run_id));
    } catch (const std::exception& e) {
      spdlog::debug("sut: write failed: {}", e.what());
      break;
    }
  }
  conn->shutdown();
}

}  // namespace ait::sut
