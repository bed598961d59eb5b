// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <future>
#include <memory>
#include <numbers>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "ait/aicore.hpp"
#include "ait/report.hpp"
#include "ait/script.hpp"
#include "ait/sut.hpp"
#include "ait/wire.hpp"
#include "harness.hpp"
#include "msggen.hpp"
#include "oracles.hpp"

using namespace ait;
using namespace std::chrono_literals;
using ait::testing::Cluster;
using ait::testing::RawPeer;
using ait::testing::oracle_schedule;
using ait::testing::read_file;
using ait::testing::source_path;
using report::Verdict;

namespace {

// tolerances and limits
constexpr auto kE2eLimit = 10s;
constexpr auto kFuzzLimit = 30s;
constexpr auto kRlLimit = 30s;
constexpr auto kWatchdog = 60s;
constexpr double kCfoTol = 0.05;
constexpr int kFuzzSeeds = 20;
constexpr int kFuzzNeeded = 19;
constexpr std::size_t kFuzzBudget = 500;
constexpr int kSweepPoints = 1000;
constexpr double kRlRelTol = 0.05;
constexpr int kRlSeeds = 10;
constexpr double kSensTol = 1e-9;
constexpr int kSensCases = 100;
constexpr int kAdvCases = 100;
constexpr int kChunkTrials = 10000;

struct Outcome {
  bool pass = false;
  std::string note;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Verdict> verdicts(const report::RunRecord& r) {
  std::vector<Verdict> v;
  for (const auto& s : r.steps) v.push_back(s.verdict);
  return v;
}

bool all_pass(const report::RunRecord& r) {
  return !r.steps.empty() && std::all_of(r.steps.begin(), r.steps.end(), [](auto& s) { return s.verdict == Verdict::PASS; });
}

std::string sleeps(std::initializer_list<int> ms) {
  std::string s = "schema: 1\nmode: SIM\nactions:\n";
  for (int m : ms) s += fmt::format("  - name: sleep\n    params: {{ms: {}}}\n", m);
  return s;
}

std::string script_file(const std::string& name) { return read_file(source_path("scripts/valid/" + name + ".test.yaml")); }

report::Stat stat_of(const std::vector<double>& v) {
  report::Stat s{v[0], v[0], 0};
  double sum = 0;
  for (double x : v) {
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    sum += x;
  }
  s.mean = sum / static_cast<double>(v.size());
  return s;
}

// ---- 1: end-to-end scheduler scenario

Outcome e2e() {
  Cluster cl({"a1", "a2"});
  const auto t0 = std::chrono::steady_clock::now();
  auto rec = cl.run(script_file("scheduler_two_actors"), cl.config({"a1", "a2"}), Millis(30000));
  const double took = seconds_since(t0);
  auto want = oracle_schedule({3, 2}, {2, 1}, 4, 4);

  if (rec.phase != "COMPLETE") return {false, "phase " + rec.phase};
  if (!all_pass(rec)) return {false, "a step did not pass"};
  if (rec.samples.size() != 2) return {false, fmt::format("{} KPI samples", rec.samples.size())};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& s = rec.samples[i];
    if (s.ue != fmt::format("ue{}", i + 1) || s.data_rate != want.thr[i] || s.latency != want.lat[i] ||
        s.packet_loss != want.loss[i])
      return {false, fmt::format("sample {} differs from queue simulation", i)};
  }
  if (rec.kpi.data_rate != stat_of(want.thr) || rec.kpi.latency != stat_of(want.lat) ||
      rec.kpi.packet_loss != stat_of(want.loss) || rec.kpi.success_rate != 1.0)
    return {false, "KPI summary differs from queue simulation"};
  auto text = report::render(rec, report::Format::Text);
  auto g = [](double x) { return fmt::format("{:.6g}", x); };
  for (auto [name, st] : {std::pair{"data_rate", stat_of(want.thr)}, std::pair{"latency", stat_of(want.lat)},
                          std::pair{"packet_loss", stat_of(want.loss)}}) {
    auto row = fmt::format("{:<12} {:>10} {:>10} {:>10}", name, g(st.min), g(st.max), g(st.mean));
    if (text.find(row) == std::string::npos) return {false, "report KPI row missing: " + row};
  }
  if (took >= std::chrono::duration<double>(kE2eLimit).count()) return {false, fmt::format("took {:.2f}s", took)};
  return {true, fmt::format("{} steps PASS, KPI table equals queue simulation, {:.2f}s", rec.steps.size(), took)};
}

// ---- 2: reproducibility and replay

std::vector<std::string> digests(const report::RunRecord& r) {
  std::vector<std::string> d;
  for (const auto& t : r.traces) {
    auto it = r.trace_docs.find(t.id);
    if (it == r.trace_docs.end()) throw std::runtime_error("trace document missing: " + t.id);
    auto recomputed = aicore::ExplorationTrace::from_json(it->second).digest();
    if (recomputed != t.digest) throw std::runtime_error("stored trace does not hash to its digest: " + t.id);
    d.push_back(t.digest);
  }
  return d;
}

Outcome reproducibility() {
  Cluster cl({"a1", "a2"});
  const auto cfg = cl.config({"a1", "a2"}, 1234);
  std::size_t traces = 0;
  for (auto name : {"scheduler_two_actors", "demod_cfo_fuzz", "scheduler_rl", "scheduler_sensitivity", "demod_adversarial"}) {
    const auto script = script_file(name);
    auto a = cl.run(script, cfg);
    auto b = cl.run(script, cfg);
    if (a.phase != "COMPLETE" || !a.complete) return {false, std::string(name) + ": first run " + a.phase};
    const auto sa = report::render(a, report::Format::Structured);
    if (sa != report::render(b, report::Format::Structured)) return {false, std::string(name) + ": structured reports differ"};
    if (digests(a) != digests(b)) return {false, std::string(name) + ": trace digests differ"};

    auto [rs, rc] = report::replay(a);
    auto id = cl.srv->submit(rs, rc, a.run_id);
    if (!cl.srv->wait_terminal(id, Millis(60000))) return {false, std::string(name) + ": replay did not finish"};
    auto c = cl.srv->store().load(id);
    if (c.replay_of != a.run_id) return {false, std::string(name) + ": replay not linked to original"};
    if (sa != report::render(c, report::Format::Structured)) return {false, std::string(name) + ": replay report differs"};
    if (digests(a) != digests(c)) return {false, std::string(name) + ": replay trace digests differ"};
    traces += a.traces.size();
  }
  return {true, fmt::format("5 scripts x 3 runs identical, {} trace digests reproduced", traces)};
}

// ---- 3: genetic fuzzing finds the CFO failure boundary

struct FuzzCase {
  double search_s = 0;
  double best = 0;
  double sweep = 0;
  bool pass = false;
};

FuzzCase fuzz_case(std::uint64_t seed) {
  sut::SutService svc;
  Json request{{"constellation", "QPSK"},
               {"count", 2000},
               {"noise_sigma", 0.1},
               {"seed", seed},
               {"impairments", Json::array({Json{{"kind", "cfo"}, {"cfo", 0.0}}})}};
  auto ser_at = [&](double theta) {
    auto r = request;
    r["impairments"][0]["cfo"] = theta;
    return svc.handle("demodulate", r);
  };
  aicore::ParameterSpace space;
  space.dims.push_back(aicore::Dim{"cfo", aicore::Dim::Kind::Continuous, 0.0, std::numbers::pi / 2, {}});
  aicore::Objective score{"symbol_error_rate", 0.5, false};
  const auto t0 = std::chrono::steady_clock::now();
  auto r = aicore::fuzz_genetic(space, score, kFuzzBudget, aicore::GaParams{},
                                [&](const Json& p) { return ser_at(p["cfo"].get<double>()); }, seed);
  FuzzCase c;
  c.search_s = seconds_since(t0);
  c.best = r.best["cfo"].get<double>();
  c.sweep = std::numbers::pi / 2;
  for (int i = 0; i < kSweepPoints; ++i) {
    double th = std::numbers::pi / 2 * i / (kSweepPoints - 1);
    if (ser_at(th)["symbol_error_rate"].get<double>() >= 0.5) {
      c.sweep = th;
      break;
    }
  }
  const double q = std::numbers::pi / 4;
  c.pass = std::abs(c.best - q) <= kCfoTol && std::abs(c.sweep - q) <= kCfoTol && std::abs(c.best - c.sweep) <= kCfoTol;
  return c;
}

/// The time limit covers the searches; the validation sweeps are not timed.
Outcome fuzz_cfo() {
  int ok = 0;
  double worst = 0, search = 0;
  for (int s = 1; s <= kFuzzSeeds; ++s) {
    auto c = fuzz_case(static_cast<std::uint64_t>(s));
    ok += c.pass;
    search += c.search_s;
    worst = std::max(worst, std::abs(c.best - std::numbers::pi / 4));
  }
  bool pass = ok >= kFuzzNeeded && search < std::chrono::duration<double>(kFuzzLimit).count();
  return {pass, fmt::format("{}/{} seeds within {} rad of pi/4 and of the sweep crossing (worst {:.4f}), search {:.2f}s",
                            ok, kFuzzSeeds, kCfoTol, worst, search)};
}

// ---- 4: Q-learning

Outcome rl() {
  const auto t0 = std::chrono::steady_clock::now();
  sut::SutService svc;
  auto ai = *script::parse_script(script_file("scheduler_rl")).actions.at(0).ai;
  auto q = aicore::QParams::from_json(ai["q"]);
  aicore::SchedulerDemandEnv::Options o;
  o.ues = 2;
  o.max_demand = ai["env_params"]["max_demand"].get<std::int64_t>();
  o.capacity = ai["env_params"]["capacity"].get<std::int64_t>();
  if (o.max_demand * o.max_demand != 16) return {false, "scheduler_rl is not the 16-state environment"};

  double min_qos = 1e300;
  for (std::int64_t a = 1; a <= o.max_demand; ++a)
    for (std::int64_t b = 1; b <= o.max_demand; ++b)
      min_qos = std::min(min_qos, oracle_schedule({a, b}, {1, 1}, o.capacity, 1).qos);

  double worst_found = -1e300;
  for (int seed = 0; seed < kRlSeeds; ++seed) {
    aicore::SchedulerDemandEnv env(o, [&](const Json& r) { return svc.handle("schedule", r); });
    auto r = aicore::rl_explore(env, q, static_cast<std::uint64_t>(seed));
    auto d = env.demands(r.max_reward_state);
    double found = oracle_schedule(d, {1, 1}, o.capacity, 1).qos;
    worst_found = std::max(worst_found, found);
    if (found - min_qos > kRlRelTol * std::abs(min_qos))
      return {false, fmt::format("seed {}: found qos {} vs exhaustive minimum {}", seed, found, min_qos)};
  }

  // value iteration on the two-state chain, written out by hand
  const double gamma = aicore::QParams{}.gamma;
  const std::size_t next[2][2] = {{0, 1}, {0, 1}};
  const double pay[2][2] = {{1, 0}, {0, 2}};
  double v[2] = {0, 0}, qs[2][2] = {};
  for (int it = 0; it < 10000; ++it) {
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) qs[s][a] = pay[s][a] + gamma * v[next[s][a]];
    v[0] = std::max(qs[0][0], qs[0][1]);
    v[1] = std::max(qs[1][0], qs[1][1]);
  }
  std::vector<std::size_t> vi{qs[0][1] > qs[0][0] ? 1u : 0u, qs[1][1] > qs[1][0] ? 1u : 0u};
  for (int seed = 0; seed < kRlSeeds; ++seed) {
    aicore::ChainEnv chain;
    auto r = aicore::rl_explore(chain, aicore::QParams{}, static_cast<std::uint64_t>(seed));
    if (r.greedy_policy != vi) return {false, fmt::format("seed {}: chain policy differs from value iteration", seed)};
  }
  const double took = seconds_since(t0);
  if (took >= std::chrono::duration<double>(kRlLimit).count()) return {false, fmt::format("took {:.2f}s", took)};
  return {true, fmt::format("worst qos found {:.6g} vs minimum {:.6g} over {} seeds; chain policy [{},{}] matches, {:.2f}s",
                            worst_found, min_qos, kRlSeeds, vi[0], vi[1], took)};
}

// ---- 5: sensitivity

Outcome sensitivity() {
  std::mt19937_64 g(55);
  std::uniform_real_distribution<double> coef(-5, 5), pos(-10, 10);
  double worst = 0;
  for (int c = 0; c < kSensCases; ++c) {
    const int dims = 2 + static_cast<int>(g() % 4);
    const int inert = static_cast<int>(g() % dims);
    aicore::ParameterSpace space;
    Json baseline = Json::object();
    std::map<std::string, std::vector<Json>> levels;
    std::vector<double> a(dims), b(dims);
    std::vector<std::string> names;
    for (int d = 0; d < dims; ++d) {
      names.push_back(fmt::format("x{}", d));
      space.dims.push_back(aicore::Dim{names[d], aicore::Dim::Kind::Continuous, -10, 10, {}});
      a[d] = d == inert ? 0.0 : coef(g);
      b[d] = pos(g);
      baseline[names[d]] = b[d];
      const int n = 2 + static_cast<int>(g() % 6);
      for (int l = 0; l < n; ++l) levels[names[d]].push_back(pos(g));
    }
    const double offset = coef(g);
    aicore::Oracle f = [&](const Json& p) {
      double y = offset;
      for (int d = 0; d < dims; ++d)
        if (d != inert) y += a[d] * p[names[d]].get<double>();
      return Json{{"y", y}};
    };
    auto r = aicore::sensitivity_analysis(space, baseline, levels, f, aicore::Objective{"y", std::nullopt, false},
                                          static_cast<std::uint64_t>(c));
    for (int d = 0; d < dims; ++d) {
      if (d == inert) {
        if (r.index[d] != 0.0) return {false, fmt::format("case {}: inert index {}", c, r.index[d])};
        continue;
      }
      double want = 0;
      for (const auto& l : levels[names[d]]) want = std::max(want, std::abs(a[d]) * std::abs(l.get<double>() - b[d]));
      double err = std::abs(r.index[d] - want);
      worst = std::max(worst, err);
      if (err > kSensTol) return {false, fmt::format("case {} dim {}: index {} vs analytic {}", c, d, r.index[d], want)};
    }
  }
  return {true, fmt::format("{} linear cases: inert indices exactly 0, max error {:.3g}", kSensCases, worst)};
}

// ---- 6: adversarial perturbation

int quadrant(double re, double im) { return (re < 0 ? 1 : 0) + (im < 0 ? 2 : 0); }

Outcome adversarial() {
  sut::SutService svc;
  std::mt19937_64 g(66);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2), u(0, 1);
  const double s = std::sqrt(0.5);
  int found = 0, sub_not_found = 0;
  for (int c = 0; c < kAdvCases; ++c) {
    const std::size_t n = 1 + g() % 3;
    std::vector<double> base;
    for (std::size_t i = 0; i < n; ++i) {
      base.push_back((g() % 2 ? s : -s) + jitter(g));
      base.push_back((g() % 2 ? s : -s) + jitter(g));
    }
    double threshold = 1e300;
    for (double x : base) threshold = std::min(threshold, std::abs(x));
    aicore::VectorOracle oracle = [&](std::span<const double> x) {
      Json sym = Json::array();
      for (std::size_t i = 0; i + 1 < x.size(); i += 2) sym.push_back({x[i], x[i + 1]});
      auto r = svc.handle("demodulate", Json{{"constellation", "QPSK"}, {"symbols", sym}});
      return Json{{"decision", r["decided_indices"]}, {"confidence", r["mean_confidence"]}};
    };
    auto flips = [&](const std::vector<double>& p) {
      for (std::size_t i = 0; i < n; ++i)
        if (quadrant(base[2 * i], base[2 * i + 1]) != quadrant(base[2 * i] + p[2 * i], base[2 * i + 1] + p[2 * i + 1]))
          return true;
      return false;
    };

    aicore::AdvParams p;
    p.norm_bound = threshold * (1.05 + u(g));
    p.budget = 100;
    p.impairment_menu = {"cfo", "iq_imbalance", "interference"};
    auto r = aicore::adversarial_perturb(base, p, oracle, static_cast<std::uint64_t>(c));
    if (r.queries > p.budget) return {false, fmt::format("case {}: {} queries over budget", c, r.queries)};
    if (r.found) {
      ++found;
      double norm = 0;
      for (double x : r.perturbation) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > p.norm_bound) return {false, fmt::format("case {}: norm {} over bound {}", c, norm, p.norm_bound)};
      if (!flips(r.perturbation)) return {false, fmt::format("case {}: reported perturbation does not flip", c)};
      std::vector<double> adv = base;
      for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += r.perturbation[i];
      if (oracle(adv)["decision"] == oracle(base)["decision"])
        return {false, fmt::format("case {}: SUT decision unchanged under perturbation", c)};
    }

    aicore::AdvParams sub = p;
    sub.norm_bound = threshold * (0.5 + 0.49 * u(g));
    auto rs = aicore::adversarial_perturb(base, sub, oracle, static_cast<std::uint64_t>(c) + 1000);
    sub_not_found += !rs.found;
  }
  bool pass = sub_not_found == kAdvCases;
  return {pass, fmt::format("{} of {} found perturbations verified; sub-threshold NOT_FOUND {}/{}", found, kAdvCases,
                            sub_not_found, kAdvCases)};
}

// ---- 7: framing and malformed peers

Outcome protocol() {
  ait::testing::MessageGen gen(77);
  std::mt19937_64 g(78);
  for (int trial = 0; trial < kChunkTrials; ++trial) {
    const int k = std::uniform_int_distribution<int>(1, 6)(g);
    std::vector<wire::WireMessage> msgs;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < k; ++i) {
      msgs.push_back(gen.message());
      auto b = wire::encode(msgs.back());
      stream.insert(stream.end(), b.begin(), b.end());
    }
    wire::FrameDecoder d;
    std::vector<wire::WireMessage> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
      std::size_t max = (g() % 4 == 0) ? 1 : (g() % 2 ? 17 : stream.size());
      std::size_t n = std::min(stream.size() - pos, std::uniform_int_distribution<std::size_t>(1, max)(g));
      d.feed(std::span(stream.data() + pos, n));
      pos += n;
      while (auto m = d.next()) got.push_back(std::move(*m));
    }
    d.finish();
    if (got != msgs) return {false, fmt::format("chunking trial {} decoded differently", trial)};
  }

  Cluster cl({"a1"});
  const auto port = cl.srv->actor_port();
  auto id = cl.srv->submit(sleeps({300, 300}), cl.config({"a1"}));

  RawPeer truncated(port);
  truncated.send({0, 0, 0, 100, '{', '"'});
  truncated.sock.shutdown();
  if (!truncated.closed_by_server()) return {false, "truncated frame left connection open"};

  RawPeer oversized(port);
  oversized.send({0xFF, 0xFF, 0xFF, 0xFF, 0, 0});
  if (!oversized.closed_by_server()) return {false, "oversized frame left connection open"};

  RawPeer unknown(port);
  if (!unknown.register_as("bad1")) return {false, "raw peer could not register"};
  unknown.send_body(R"({"payload":{},"seq":2,"type":"BOGUS","version":1})");
  if (!unknown.closed_by_server()) return {false, "unknown type left connection open"};

  if (!cl.srv->wait_terminal(id, Millis(10000))) return {false, "healthy run did not finish"};
  auto rec = cl.srv->store().load(id);
  if (rec.phase != "COMPLETE" || !all_pass(rec) || !rec.complete) return {false, "healthy run was disturbed"};
  auto next = cl.run(sleeps({1}), cl.config({"a1"}));
  if (!all_pass(next)) return {false, "healthy actor not served afterwards"};
  return {true, fmt::format("{} chunked streams decoded; 3 bad peers dropped, concurrent run on a1 PASS", kChunkTrials)};
}

// ---- 8: orchestration

Outcome orchestration() {
  {
    server::ServerOptions o;
    o.max_parallel_runs = 3;
    Cluster cl({"a1", "a2", "a3"}, o);
    const std::vector<std::pair<std::string, std::string>> sets{{"a1", "a2"}, {"a2", "a3"}, {"a1", "a3"}};
    std::vector<std::string> ids;
    for (const auto& [x, y] : sets) {
      std::string script = "schema: 1\nmode: SIM\nactions:\n";
      for (const auto& who : {x, y, x, y}) script += "  - name: sleep\n    actor: " + who + "\n    params: {ms: 20}\n";
      ids.push_back(cl.srv->submit(script, cl.config({x, y}, 42, 10, 3)));
    }
    for (const auto& id : ids) {
      if (!cl.srv->wait_terminal(id, Millis(30000))) return {false, "concurrent run did not finish"};
      auto rec = cl.srv->store().load(id);
      if (rec.phase != "COMPLETE" || !all_pass(rec)) return {false, "concurrent run " + id + " " + rec.phase};
    }
    if (auto bad = ait::testing::log_violation(cl.srv->log())) return {false, *bad};
    for (auto& a : cl.actors)
      if (a->max_active_steps() != 1) return {false, "an actor ran two steps at once"};
  }
  Cluster cl({"a1"});
  const std::vector<Verdict> want{Verdict::PASS, Verdict::ERROR, Verdict::SKIPPED};
  auto timed = cl.run(sleeps({10, 3000, 10}), cl.config({"a1"}, 42, 0.5));
  if (verdicts(timed) != want || timed.phase != "COMPLETE" || timed.steps[1].detail.value("kind", "") != "timeout")
    return {false, "timeout fault gave " + timed.phase};

  auto id = cl.srv->submit(sleeps({10, 5000, 10}), cl.config({"a1"}));
  for (int i = 0; i < 500 && cl.srv->status(id).cursor < 1; ++i) std::this_thread::sleep_for(10ms);
  std::this_thread::sleep_for(50ms);
  cl.actors[0]->kill();
  if (!cl.srv->wait_terminal(id, Millis(10000))) return {false, "run with killed actor never ended"};
  auto killed = cl.srv->store().load(id);
  if (verdicts(killed) != want || killed.complete || killed.steps[1].detail.value("kind", "") != "offline")
    return {false, "actor-kill fault gave " + killed.phase};
  if (auto bad = ait::testing::log_violation(cl.srv->log())) return {false, *bad};
  return {true, "3 overlapping concurrent runs: exclusive actors, sequential steps; timeout and kill -> PASS,ERROR,SKIPPED"};
}

// ---- 9: script corpus

Outcome corpus() {
  std::size_t valid = 0, invalid = 0;
  for (const auto& e : std::filesystem::directory_iterator(source_path("scripts/valid"))) {
    auto rep = script::validate_document(read_file(e.path()));
    if (rep.error_count() != 0)
      return {false, fmt::format("{}: {} errors, first {}", e.path().filename().string(), rep.error_count(), rep.findings[0].code)};
    ++valid;
  }
  for (const auto& e : std::filesystem::directory_iterator(source_path("scripts/invalid"))) {
    auto text = read_file(e.path());
    const std::string tag = "# expect: ";
    if (text.rfind(tag, 0) != 0) return {false, e.path().filename().string() + ": no expect line"};
    auto code = text.substr(tag.size(), text.find('\n') - tag.size());
    auto rep = script::validate_document(text);
    if (rep.error_count() == 0 || !rep.has(code))
      return {false, fmt::format("{}: expected {}, got {} errors", e.path().filename().string(), code, rep.error_count())};
    ++invalid;
  }
  return {true, fmt::format("{} valid scripts clean, {} invalid scripts flagged with their codes", valid, invalid)};
}

bool run_criterion(int n, const std::function<Outcome()>& fn) {
  auto task = std::make_shared<std::packaged_task<Outcome()>>([&fn] {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  });
  auto fut = task->get_future();
  std::thread(std::move(*task)).detach();
  if (fut.wait_for(kWatchdog) != std::future_status::ready) {
    std::printf("FAIL criterion %d: watchdog expired after %llds\n", n, static_cast<long long>(kWatchdog.count()));
    std::fflush(stdout);
    std::_Exit(1);
  }
  auto o = fut.get();
  std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.note.c_str());
  std::fflush(stdout);
  return o.pass;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::function<Outcome()>> criteria{e2e, reproducibility, fuzz_cfo, rl, sensitivity,
                                                       adversarial, protocol, orchestration, corpus};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) failed += !run_criterion(static_cast<int>(i + 1), criteria[i]);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
