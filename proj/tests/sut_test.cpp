#include <gtest/gtest.h>

#include <openssl/evp.h>

#include <cmath>
#include <deque>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "ait/error.hpp"
#include "ait/impairment.hpp"
#include "ait/rng.hpp"
#include "ait/sut.hpp"
#include "ait/clock.hpp"
#include "ait/wire.hpp"
#include "oracles.hpp"

using namespace ait;
using namespace ait::sut;
using aicore::Complex;
using std::numbers::pi;
using namespace ait::testing;

namespace {

SchedulerRequest req(std::vector<std::int64_t> d, std::vector<double> p, std::int64_t cap, std::int64_t ttis) {
  SchedulerRequest r;
  r.ue_demands = std::move(d);
  r.priorities = std::move(p);
  r.capacity = cap;
  r.tti_count = ttis;
  return r;
}

Json qpsk_request(double cfo, std::size_t count = 400, double noise = 0, std::uint64_t seed = 1) {
  return Json{{"constellation", "QPSK"},
              {"count", count},
              {"noise_sigma", noise},
              {"seed", seed},
              {"impairments", Json::array({{{"kind", "cfo"}, {"cfo", cfo}}})}};
}

double ser(const Json& request) { return *demodulate(parse_demod_request(request)).symbol_error_rate; }

}  // namespace

TEST(Scheduler, SymmetricNoContention) {
  auto r = schedule(req({2, 2}, {1, 1}, 4, 1));
  EXPECT_EQ(r.allocations, (std::vector<std::vector<std::int64_t>>{{2, 2}}));
  EXPECT_EQ(r.qos_score, 1.0);
}

TEST(Scheduler, ProportionalShares) {
  auto r = schedule(req({6, 2}, {1, 1}, 4, 1));
  EXPECT_EQ(r.allocations[0], (std::vector<std::int64_t>{3, 1}));
}

TEST(Scheduler, FourEqualUesMatchQueueSimulator) {
  auto r = schedule(req({4, 4, 4, 4}, {1, 1, 1, 1}, 4, 4));
  auto o = oracle_schedule({4, 4, 4, 4}, {1, 1, 1, 1}, 4, 4);
  EXPECT_EQ(r.allocations, o.alloc);
  double loss = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.kpi[i].loss_frac, o.loss[i]);
    EXPECT_EQ(r.kpi[i].mean_latency_ttis, o.lat[i]);
    loss += r.kpi[i].loss_frac;
  }
  EXPECT_DOUBLE_EQ(loss / 4, 0.75);
}

TEST(Scheduler, TiesGoToLowestIndex) {
  auto r = schedule(req({1, 1, 1}, {1, 1, 1}, 2, 1));
  EXPECT_EQ(r.allocations[0], (std::vector<std::int64_t>{1, 1, 0}));
}

TEST(Scheduler, WaterFillingRedistributes) {
  // equal weights give 4 each; UE0 can take only 1, UE1 absorbs the rest
  auto r = schedule(req({1, 10}, {10, 1}, 8, 1));
  EXPECT_EQ(r.allocations[0], (std::vector<std::int64_t>{1, 7}));
}

TEST(Scheduler, MalformedRequests) {
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[],"capacity":4})")), SchemaError);
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[0],"capacity":4})")), SchemaError);
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[1],"capacity":0})")), SchemaError);
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[1,2],"priorities":[1],"capacity":1})")), SchemaError);
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[1],"priorities":[-1],"capacity":1})")), SchemaError);
  EXPECT_THROW(parse_scheduler_request(Json::parse(R"({"ue_demands":[1],"capacity":1,"tti_count":0})")), SchemaError);
}

TEST(SchedulerProperty, MatchesQueueSimulator) {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 6)(g);
    std::vector<std::int64_t> d(n), p(n);
    for (auto& x : d) x = std::uniform_int_distribution<std::int64_t>(1, 12)(g);
    for (auto& x : p) x = std::uniform_int_distribution<std::int64_t>(1, 4)(g);
    auto cap = std::uniform_int_distribution<std::int64_t>(1, 30)(g);
    auto ttis = std::uniform_int_distribution<std::int64_t>(1, 6)(g);
    auto r = schedule(req(d, std::vector<double>(p.begin(), p.end()), cap, ttis));
    auto o = oracle_schedule(d, p, cap, ttis);
    ASSERT_EQ(r.allocations, o.alloc) << "trial " << trial << " " << to_json(r) << " d=" << Json(d) << " p=" << Json(p) << " cap=" << cap;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(r.kpi[i].throughput_frac, o.thr[i]);
      ASSERT_EQ(r.kpi[i].mean_latency_ttis, o.lat[i]);
      ASSERT_EQ(r.kpi[i].loss_frac, o.loss[i]);
    }
    ASSERT_EQ(r.qos_score, o.qos);
  }
}

TEST(SchedulerProperty, CapacityQueueAndQosBounds) {
  std::mt19937_64 g(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 8)(g);
    std::vector<std::int64_t> d(n);
    std::vector<double> p(n);
    for (auto& x : d) x = std::uniform_int_distribution<std::int64_t>(1, 20)(g);
    for (auto& x : p) x = std::uniform_real_distribution<double>(0.1, 5)(g);
    auto cap = std::uniform_int_distribution<std::int64_t>(1, 40)(g);
    auto ttis = std::uniform_int_distribution<std::int64_t>(1, 8)(g);
    auto r = schedule(req(d, p, cap, ttis));
    std::vector<std::int64_t> queue(n, 0);
    for (const auto& a : r.allocations) {
      std::int64_t sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        queue[i] += d[i];
        ASSERT_GE(a[i], 0);
        ASSERT_LE(a[i], queue[i]);
        queue[i] -= a[i];
        sum += a[i];
      }
      ASSERT_LE(sum, cap);
      // work conserving: capacity is only left idle when every queue is empty
      if (sum < cap) {
        for (auto q : queue) ASSERT_EQ(q, 0);
      }
    }
    ASSERT_GE(r.qos_score, 0.0);
    ASSERT_LE(r.qos_score, 1.0);
    bool all_served = std::all_of(queue.begin(), queue.end(), [](auto q) { return q == 0; });
    ASSERT_EQ(r.qos_score == 1.0, all_served);
  }
}

TEST(SchedulerProperty, RaisingPriorityNeverHurts) {
  std::mt19937_64 g(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 5)(g);
    std::vector<std::int64_t> d(n);
    std::vector<double> p(n);
    for (auto& x : d) x = std::uniform_int_distribution<std::int64_t>(1, 10)(g);
    for (auto& x : p) x = std::uniform_int_distribution<int>(1, 4)(g);
    auto cap = std::uniform_int_distribution<std::int64_t>(1, 20)(g);
    auto ttis = std::uniform_int_distribution<std::int64_t>(1, 5)(g);
    auto who = std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
    auto before = schedule(req(d, p, cap, ttis));
    p[who] += std::uniform_int_distribution<int>(1, 3)(g);
    auto after = schedule(req(d, p, cap, ttis));
    std::int64_t sb = 0, sa = 0;
    for (std::size_t t = 0; t < before.allocations.size(); ++t) {
      sb += before.allocations[t][who];
      sa += after.allocations[t][who];
    }
    ASSERT_GE(sa, sb) << "trial " << trial;
  }
}

// ---- demodulator ----

TEST(Demod, CleanChannelNoErrors) { EXPECT_EQ(ser(qpsk_request(0)), 0.0); }

TEST(Demod, QuarterTurnMapsOntoNeighbours) {
  auto request = parse_demod_request(qpsk_request(pi / 2, 64));
  std::vector<int> truth;
  auto rx = received_symbols(request, truth);
  auto resp = demodulate(request);
  auto pts = constellation_points(Constellation::QPSK);
  EXPECT_EQ(*resp.symbol_error_rate, 1.0);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    Complex rotated = pts[static_cast<std::size_t>(truth[k])] * Complex(std::cos(pi / 2), std::sin(pi / 2));
    EXPECT_NEAR(std::abs(rx[k] - rotated), 0.0, 1e-12);
    // the rotated symbol sits on a constellation point, one index further on
    EXPECT_NEAR(std::abs(rotated - pts[static_cast<std::size_t>((truth[k] + 1) % 4)]), 0.0, 1e-12);
    EXPECT_EQ(resp.decided_indices[k], (truth[k] + 1) % 4);
  }
}

TEST(Demod, NoErrorsInsideQuarterPi) {
  for (int i = 0; i < 200; ++i) {
    double theta = (pi / 4) * (i / 200.0) * 0.999;
    EXPECT_EQ(ser(qpsk_request(theta, 64)), 0.0) << theta;
    EXPECT_EQ(ser(qpsk_request(-theta, 64)), 0.0) << -theta;
  }
}

TEST(Demod, QuarterTurnMultiplesGiveZeroOrOne) {
  for (int k = -2; k <= 2; ++k) {
    double s = ser(qpsk_request(k * pi / 2, 64));
    EXPECT_TRUE(s == 0.0 || s == 1.0) << k << " " << s;
    EXPECT_EQ(s, k == 0 ? 0.0 : 1.0);
  }
}

TEST(Demod, BruteForceSweepFindsQuarterPiBoundary) {
  double first_error = -1;
  for (int i = 0; i < 1000; ++i) {
    double theta = (pi / 2) * i / 999.0;
    if (ser(qpsk_request(theta, 32)) > 0) {
      first_error = theta;
      break;
    }
  }
  EXPECT_NEAR(first_error, pi / 4, (pi / 2) / 999.0 + 1e-12);
}

TEST(Demod, ConfidenceFormula) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int i = 0; i < 500; ++i) {
    Complex s(u(g), u(g));
    for (auto c : {Constellation::QPSK, Constellation::QAM16}) {
      auto pts = constellation_points(c);
      std::vector<double> d;
      for (auto p : pts) d.push_back(std::abs(s - p));
      auto sorted = d;
      std::sort(sorted.begin(), sorted.end());
      auto best = static_cast<int>(std::min_element(d.begin(), d.end()) - d.begin());
      auto dec = decide_min_distance(c, s);
      EXPECT_EQ(dec.index, best);
      EXPECT_NEAR(dec.confidence, (sorted[1] - sorted[0]) / (sorted[1] + sorted[0]), 1e-12);
    }
  }
}

TEST(Demod, Geometry) {
  auto q = constellation_points(Constellation::QPSK);
  EXPECT_NEAR(q[0].real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(q[0] - q[1]), min_point_distance(Constellation::QPSK), 1e-12);
  auto m = constellation_points(Constellation::QAM16);
  double avg = 0;
  for (auto p : m) avg += std::norm(p);
  EXPECT_NEAR(avg / 16, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(m[0] - m[1]), min_point_distance(Constellation::QAM16), 1e-12);
  // a tie between two points goes to the lower index
  EXPECT_EQ(decide_min_distance(Constellation::QPSK, Complex(0, 1)).index, 0);
}

TEST(Demod, Determinism) {
  auto r = qpsk_request(0.6, 500, 0.3, 77);
  r["impairments"].push_back({{"kind", "interference"}, {"power", 0.1}, {"tail", "heavy_tail"}});
  auto a = canonical(to_json(demodulate(parse_demod_request(r))));
  auto b = canonical(to_json(demodulate(parse_demod_request(r))));
  EXPECT_EQ(a, b);
}

TEST(Demod, ExplicitSymbolsWithoutTruthHaveNoSer) {
  auto r = demodulate(parse_demod_request(Json::parse(R"({"constellation":"QPSK","symbols":[[0.7,0.7],[-0.7,-0.7]]})")));
  EXPECT_EQ(r.decided_indices, (std::vector<int>{0, 2}));
  EXPECT_FALSE(r.symbol_error_rate.has_value());
}

TEST(Demod, PerceptronIsAccurateOnCleanSymbols) {
  auto r = qpsk_request(0, 400);
  r["classifier"] = "perceptron";
  EXPECT_LT(ser(r), 0.01);
}

TEST(Demod, MalformedRequests) {
  EXPECT_THROW(parse_demod_request(Json::parse(R"({"constellation":"8PSK","count":1})")), SchemaError);
  EXPECT_THROW(parse_demod_request(Json::parse(R"({"constellation":"QPSK"})")), SchemaError);
  EXPECT_THROW(parse_demod_request(Json::parse(R"({"constellation":"QPSK","true_indices":[4]})")), SchemaError);
  EXPECT_THROW(parse_demod_request(Json::parse(R"({"constellation":"QPSK","symbols":[[1]]})")), SchemaError);
  EXPECT_THROW(parse_demod_request(Json::parse(R"({"constellation":"QPSK","count":1,"impairments":[{"kind":"cfo","cfo":4}]})")),
               SchemaError);
}

// ---- impairments ----

TEST(Impairment, Identities) {
  auto rng = CounterRng::from_seed(1);
  std::vector<Complex> x{{1, 2}, {-0.5, 0.25}, {0, -1}};
  EXPECT_EQ(aicore::apply_impairment(x, aicore::Cfo{0}, rng), x);
  EXPECT_EQ(aicore::apply_impairment(x, aicore::Interference{0}, rng), x);
  EXPECT_EQ(aicore::apply_impairment(x, aicore::IqImbalance{0, 0}, rng), x);
}

TEST(Impairment, ProgressiveRotation) {
  auto rng = CounterRng::from_seed(1);
  std::vector<Complex> x(5, Complex(1, 0));
  auto y = aicore::apply_impairment(x, aicore::Cfo{0.3, aicore::CfoModel::Progressive}, rng);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(std::abs(y[k] - std::polar(1.0, 0.3 * static_cast<double>(k))), 0, 1e-12);
}

TEST(Impairment, IqImbalanceFormula) {
  auto rng = CounterRng::from_seed(1);
  std::vector<Complex> x{{0.3, -0.8}};
  auto y = aicore::apply_impairment(x, aicore::IqImbalance{3, 10}, rng);
  double g = std::pow(10.0, 3.0 / 20.0), phi = 10 * pi / 180;
  EXPECT_NEAR(y[0].real(), 0.3, 1e-15);
  EXPECT_NEAR(y[0].imag(), g * (-0.8 * std::cos(phi) - 0.3 * std::sin(phi)), 1e-12);
}

TEST(Impairment, InterferencePower) {
  for (auto tail : {aicore::Tail::Gaussian, aicore::Tail::HeavyTail}) {
    auto rng = CounterRng::from_seed(9);
    std::vector<Complex> x(40000, Complex(0, 0));
    auto y = aicore::apply_impairment(x, aicore::Interference{0.5, tail}, rng);
    double p = 0;
    for (auto v : y) p += std::norm(v);
    EXPECT_NEAR(p / static_cast<double>(y.size()), 0.5, tail == aicore::Tail::Gaussian ? 0.02 : 0.1);
  }
}

TEST(Impairment, ValidationAndJson) {
  EXPECT_THROW(aicore::validate(aicore::Cfo{4}), ConfigError);
  EXPECT_THROW(aicore::validate(aicore::IqImbalance{7, 0}), ConfigError);
  EXPECT_THROW(aicore::validate(aicore::Interference{-1}), ConfigError);
  EXPECT_NO_THROW(aicore::validate(aicore::Cfo{-pi}));
  for (aicore::Impairment imp : {aicore::Impairment(aicore::Cfo{0.2, aicore::CfoModel::Progressive}),
                                 aicore::Impairment(aicore::IqImbalance{-2, 5}),
                                 aicore::Impairment(aicore::Interference{0.3, aicore::Tail::HeavyTail})})
    EXPECT_EQ(aicore::impairment_from_json(aicore::to_json(imp)), imp);
  EXPECT_THROW(aicore::impairment_from_json(Json{{"kind", "fading"}}), SchemaError);
}

// ---- RNG ----

TEST(Rng, CounterModeMatchesSha256) {
  auto digest = [](const std::vector<std::uint8_t>& in) {
    std::vector<std::uint8_t> out(32);
    unsigned len = 0;
    EVP_Digest(in.data(), in.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
  };
  auto be64 = [](std::vector<std::uint8_t>& v, std::uint64_t x) {
    for (int i = 7; i >= 0; --i) v.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  };
  std::vector<std::uint8_t> seed;
  be64(seed, 2024);
  auto key = digest(seed);
  auto rng = CounterRng::from_seed(2024);
  for (std::uint64_t block = 0; block < 3; ++block) {
    auto in = key;
    be64(in, block);
    auto d = digest(in);
    for (int w = 0; w < 4; ++w) {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(w * 8 + i)];
      EXPECT_EQ(rng.next_u64(), v);
    }
  }
}

TEST(Rng, StepStreamsAreIndependentAndStable) {
  auto a = CounterRng::for_step(42, "a1", 3).next_u64();
  EXPECT_EQ(a, CounterRng::for_step(42, "a1", 3).next_u64());
  EXPECT_NE(a, CounterRng::for_step(42, "a2", 3).next_u64());
  EXPECT_NE(a, CounterRng::for_step(42, "a1", 4).next_u64());
  EXPECT_NE(a, CounterRng::for_step(43, "a1", 3).next_u64());
}

TEST(Rng, Distributions) {
  auto rng = CounterRng::from_seed(5);
  double s = 0, s2 = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
    double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0, 0.02);
  EXPECT_NEAR(s2 / n, 1, 0.03);
}

// ---- session service ----

TEST(Service, CellLifecycle) {
  SutService svc;
  EXPECT_EQ(svc.handle("version", Json::object())["version"], std::string(kSutVersion));
  auto a = svc.handle("attach", {{"cell", "c"}, {"ue", "u1"}, {"priority", 2}, {"demand", 3}});
  EXPECT_EQ(a["session_id"], "c/u1");
  svc.handle("attach", {{"cell", "c"}, {"ue", "u2"}, {"priority", 1}});
  svc.handle("set_demand", {{"cell", "c"}, {"ue", "u2"}, {"demand", 2}});
  auto r = svc.handle("run_cell", {{"cell", "c"}, {"capacity", 4}, {"tti_count", 4}});
  auto direct = to_json(schedule(req({3, 2}, {2, 1}, 4, 4)));
  for (const auto& k : {"allocations", "kpi", "qos_score"}) EXPECT_EQ(r[k], direct[k]) << k;
  EXPECT_EQ(r["ues"], Json::parse(R"(["u1","u2"])"));
  svc.handle("detach", {{"cell", "c"}, {"ue", "u1"}});
  EXPECT_EQ(svc.handle("cell_status", {{"cell", "c"}})["ues"].size(), 1u);
  EXPECT_THROW(svc.handle("detach", {{"cell", "c"}, {"ue", "u9"}}), SchemaError);
  EXPECT_THROW(svc.handle("warp", Json::object()), SchemaError);
}

namespace {

wire::WireMessage sut_request(const std::string& op, Json body) {
  return wire::make(wire::MsgType::SUT_REQUEST, Json{{"op", op}, {"body", std::move(body)}});
}

}  // namespace

TEST(Server, ServesConcurrentClientsAndSurvivesBadRequests) {
  SutServer srv({"127.0.0.1", 0});
  net::Endpoint ep{"127.0.0.1", srv.port()};
  auto worker = [&](std::int64_t d0, std::vector<std::int64_t>& out) {
    wire::Connection c(net::connect_to(ep, Millis(1000)));
    for (int i = 0; i < 20; ++i) {
      auto r = c.request(sut_request("schedule", {{"ue_demands", {d0, 2}}, {"capacity", 4}}), Millis(2000));
      ASSERT_EQ(r.type, wire::MsgType::SUT_RESPONSE);
      out = r.payload["body"]["allocations"][0].get<std::vector<std::int64_t>>();
    }
  };
  std::vector<std::int64_t> x, y;
  std::thread t1(worker, 6, std::ref(x)), t2(worker, 2, std::ref(y));
  t1.join();
  t2.join();
  EXPECT_EQ(x, (std::vector<std::int64_t>{3, 1}));
  EXPECT_EQ(y, (std::vector<std::int64_t>{2, 2}));

  wire::Connection c(net::connect_to(ep, Millis(1000)));
  auto bad = c.request(sut_request("schedule", {{"ue_demands", "lots"}}), Millis(2000));
  EXPECT_EQ(bad.type, wire::MsgType::ERROR);
  auto good = c.request(sut_request("version", Json::object()), Millis(2000));
  EXPECT_EQ(good.type, wire::MsgType::SUT_RESPONSE);
  EXPECT_EQ(good.payload["body"]["version"], std::string(kSutVersion));
  srv.stop();
}

TEST(Server, VersionMismatchAnsweredWithError) {
  SutServer srv({"127.0.0.1", 0});
  auto sock = net::connect_to({"127.0.0.1", srv.port()}, Millis(1000));
  std::string body = R"({"payload":{"body":{},"op":"version"},"seq":1,"type":"SUT_REQUEST","version":2})";
  std::vector<std::uint8_t> frame{0, 0, 0, static_cast<std::uint8_t>(body.size())};
  frame.insert(frame.end(), body.begin(), body.end());
  sock.send_all(frame);
  wire::Connection c(std::move(sock));
  auto r = c.receive(Millis(2000));
  ASSERT_TRUE(r);
  EXPECT_EQ(r->type, wire::MsgType::ERROR);
  EXPECT_EQ(r->payload["code"], "UNSUPPORTED_VERSION");
  srv.stop();
}

TEST(Server, ClosedPortRefused) {
  std::uint16_t port;
  {
    net::Listener l({"127.0.0.1", 0});
    port = l.port();
  }
  try {
    net::connect_to({"127.0.0.1", port}, Millis(500));
    FAIL();
  } catch (const AdapterError& e) {
    EXPECT_EQ(e.kind, "refused");
  }
}
