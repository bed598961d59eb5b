#include <gtest/gtest.h>

#include <map>
#include <set>

#include "ait/control.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace ait;
using namespace ait::server;
using report::Verdict;
using ait::testing::Cluster;
using ait::testing::RawPeer;
using ait::testing::oracle_schedule;
using ait::testing::read_file;
using ait::testing::source_path;

namespace {

std::vector<Verdict> verdicts(const report::RunRecord& r) {
  std::vector<Verdict> v;
  for (const auto& s : r.steps) v.push_back(s.verdict);
  return v;
}

std::string sleeps(std::initializer_list<int> ms, const std::string& actor = "", const std::string& extra = "") {
  std::string y = "schema: 1\nmode: SIM\n" + extra + "actions:\n";
  for (int m : ms) {
    y += "  - name: sleep\n";
    if (!actor.empty()) y += "    actor: " + actor + "\n";
    y += "    params: {ms: " + std::to_string(m) + "}\n";
  }
  return y;
}

template <class Pred>
bool eventually(Pred p, Millis limit = Millis(5000)) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (p()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return p();
}

}  // namespace

TEST(Orchestration, SchedulerScriptCompletesWithOracleKpis) {
  Cluster cl({"a1", "a2"});
  auto rec = cl.run(read_file(source_path("scripts/valid/scheduler_two_actors.test.yaml")), cl.config({"a1", "a2"}));
  EXPECT_EQ(rec.phase, "COMPLETE");
  EXPECT_TRUE(rec.complete);
  ASSERT_EQ(rec.steps.size(), 10u);
  for (const auto& s : rec.steps) EXPECT_EQ(s.verdict, Verdict::PASS) << s.index << " " << s.detail.dump();
  auto want = oracle_schedule({3, 2}, {2, 1}, 4, 4);
  ASSERT_EQ(rec.samples.size(), 2u);
  EXPECT_EQ(rec.samples[0].ue, "ue1");
  EXPECT_EQ(rec.samples[1].ue, "ue2");
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(rec.samples[i].data_rate, want.thr[i]);
    EXPECT_DOUBLE_EQ(rec.samples[i].latency, want.lat[i]);
    EXPECT_DOUBLE_EQ(rec.samples[i].packet_loss, want.loss[i]);
  }
  EXPECT_EQ(rec.sut_versions.at("a1"), std::string(sut::kSutVersion));
  EXPECT_DOUBLE_EQ(rec.kpi.success_rate, 1.0);
  EXPECT_EQ(cl.srv->collect_results(rec.run_id), rec);
  EXPECT_EQ(cl.srv->collect_results(rec.run_id), rec);
}

TEST(Orchestration, StatusOfUnknownRun) {
  Cluster cl({});
  EXPECT_THROW(cl.srv->status("nope"), UnknownRun);
  EXPECT_THROW(cl.srv->abort("nope"), UnknownRun);
  EXPECT_THROW(cl.srv->collect_results("nope"), UnknownRun);
}

TEST(Orchestration, SdrScriptFailsSetup) {
  Cluster cl({"a1"});
  try {
    cl.srv->submit(read_file(source_path("scripts/valid/sdr_mode.test.yaml")), cl.config({"a1"}));
    FAIL();
  } catch (const RejectedError& e) {
    ASSERT_EQ(e.reasons.size(), 1u);
    EXPECT_EQ(e.reasons[0], "SDR adapter not available");
    EXPECT_EQ(cl.srv->status(e.run_id).phase, Phase::FAILED_SETUP);
    ASSERT_TRUE(cl.srv->wait_terminal(e.run_id, Millis(5000)));
    auto rec = cl.srv->store().load(e.run_id);
    EXPECT_EQ(rec.phase, "FAILED_SETUP");
    EXPECT_EQ(rec.setup_findings, e.reasons);
  }
}

TEST(Orchestration, InvalidScriptIsRejectedWithCodes) {
  Cluster cl({"a1"});
  try {
    cl.srv->submit("schema: 1\nmode: SIM\nactions: []\n", cl.config({"a1"}));
    FAIL();
  } catch (const RejectedError& e) {
    ASSERT_FALSE(e.reasons.empty());
    EXPECT_EQ(e.reasons[0].rfind("E_EMPTY_ACTIONS", 0), 0u);
  }
}

TEST(Orchestration, MissingActorTimesOutSetup) {
  ServerOptions o;
  o.setup_timeout = Millis(300);
  Cluster cl({"a1"}, o);
  auto id = cl.srv->submit(sleeps({10}), cl.config({"a1", "a9"}));
  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(5000)));
  auto s = cl.srv->status(id);
  EXPECT_EQ(s.phase, Phase::FAILED_SETUP);
  ASSERT_EQ(s.findings.size(), 1u);
  EXPECT_NE(s.findings[0].find("a9"), std::string::npos);
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::IDLE);
}

TEST(Orchestration, StepTimeoutHaltsRun) {
  Cluster cl({"a1"});
  auto t0 = std::chrono::steady_clock::now();
  auto rec = cl.run(sleeps({10, 3000, 10}), cl.config({"a1"}, 42, 0.5));
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
  EXPECT_EQ(rec.phase, "COMPLETE");
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::PASS, Verdict::ERROR, Verdict::SKIPPED}));
  EXPECT_EQ(rec.steps[1].detail["kind"], "timeout");
  auto s = cl.srv->status(rec.run_id);
  EXPECT_EQ(s.cursor, s.plan_size);
}

TEST(Orchestration, FailContinuesByDefault) {
  Cluster cl({"a1"});
  std::string script =
      "schema: 1\nmode: SIM\nactions:\n"
      "  - name: attach_request\n    params: {cell: c}\n"
      "  - name: await_response\n    params: {field: session_id, equals: nope}\n"
      "  - name: sleep\n    params: {ms: 1}\n";
  auto rec = cl.run(script, cl.config({"a1"}));
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::PASS, Verdict::FAIL, Verdict::PASS}));
  EXPECT_DOUBLE_EQ(rec.kpi.success_rate, 2.0 / 3.0);
}

TEST(Orchestration, ContinueOnErrorRunsRemainingSteps) {
  Cluster cl({"a1"});
  std::string script =
      "schema: 1\nmode: SIM\nmetadata:\n  on_error: continue\nactions:\n"
      "  - name: await_response\n    params: {field: x}\n"
      "  - name: sleep\n    params: {ms: 1}\n";
  auto rec = cl.run(script, cl.config({"a1"}));
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::ERROR, Verdict::PASS}));
}

TEST(Orchestration, AbortSkipsInFlightAndRest) {
  Cluster cl({"a1"});
  auto id = cl.srv->submit(sleeps({10, 5000, 10}), cl.config({"a1"}));
  ASSERT_TRUE(eventually([&] { return cl.srv->status(id).cursor >= 1; }));
  cl.srv->abort(id);
  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(3000)));
  auto rec = cl.srv->store().load(id);
  EXPECT_EQ(rec.phase, "ABORTED");
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::PASS, Verdict::SKIPPED, Verdict::SKIPPED}));
  cl.srv->abort(id);
  EXPECT_EQ(cl.srv->status(id).phase, Phase::ABORTED);
  // the actor is free again and serves the next run
  auto next = cl.run(sleeps({1}), cl.config({"a1"}));
  EXPECT_EQ(verdicts(next), std::vector<Verdict>{Verdict::PASS});
}

TEST(Orchestration, AbortWhileQueued) {
  Cluster cl({"a1"});
  auto first = cl.srv->submit(sleeps({400}), cl.config({"a1"}));
  auto second = cl.srv->submit(sleeps({10}), cl.config({"a1"}));
  EXPECT_EQ(cl.srv->status(second).phase, Phase::QUEUED);
  cl.srv->abort(second);
  ASSERT_TRUE(cl.srv->wait_terminal(second, Millis(3000)));
  EXPECT_EQ(cl.srv->status(second).phase, Phase::ABORTED);
  ASSERT_TRUE(cl.srv->wait_terminal(first, Millis(3000)));
  EXPECT_EQ(cl.srv->status(first).phase, Phase::COMPLETE);
}

TEST(Orchestration, KilledActorGivesErrorAndIncompleteRecord) {
  Cluster cl({"a1"});
  auto id = cl.srv->submit(sleeps({10, 5000, 10}), cl.config({"a1"}));
  ASSERT_TRUE(eventually([&] { return cl.srv->status(id).cursor >= 1; }));
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  cl.actors[0]->kill();
  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(10000)));
  auto rec = cl.srv->store().load(id);
  EXPECT_EQ(rec.phase, "COMPLETE");
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::PASS, Verdict::ERROR, Verdict::SKIPPED}));
  EXPECT_EQ(rec.steps[1].detail["kind"], "offline");
  EXPECT_FALSE(rec.complete);
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::OFFLINE);
  EXPECT_THROW(report::replay(rec), IncompleteRecord);
}

TEST(Orchestration, ActorDyingBeforeManifestIsPartialCollection) {
  Cluster cl({"a1"});
  cl.actors[0]->die_on_run_complete(true);
  auto id = cl.srv->submit(sleeps({5}), cl.config({"a1"}));
  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(10000)));
  try {
    cl.srv->collect_results(id);
    FAIL();
  } catch (const PartialCollection& e) {
    EXPECT_EQ(e.missing_actor_ids, std::vector<std::string>{"a1"});
  }
  auto rec = cl.srv->store().load(id);
  EXPECT_FALSE(rec.complete);
  EXPECT_EQ(rec.missing_actors, std::vector<std::string>{"a1"});
  EXPECT_EQ(verdicts(rec), std::vector<Verdict>{Verdict::PASS});
}

TEST(Registry, LivenessFollowsServerClock) {
  FakeClock clock;
  ServerOptions o;
  o.housekeeping = false;
  Cluster cl({}, o, clock);
  auto cfg = cl.actor_config("a1");
  cfg.health_period = Millis(60000);
  actor::Actor a(cfg);
  a.start();
  ASSERT_EQ(cl.srv->actor("a1")->state, ActorState::IDLE);
  clock.advance(Millis(180000));
  cl.srv->check_liveness();
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::IDLE);
  clock.advance(Millis(1));
  cl.srv->check_liveness();
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::OFFLINE);
  a.stop();
}

TEST(Registry, OfflineIdMayRegisterAgain) {
  Cluster cl({"a1"});
  cl.actors[0]->kill();
  ASSERT_TRUE(eventually([&] { return cl.srv->actor("a1")->state == ActorState::OFFLINE; }));
  auto& again = cl.add_actor("a1");
  EXPECT_TRUE(again.registered());
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::IDLE);
  EXPECT_EQ(cl.srv->actors().size(), 1u);
}

TEST(Scheduling, ConcurrentRunsKeepActorsExclusiveAndStepsSequential) {
  ServerOptions o;
  o.max_parallel_runs = 3;
  Cluster cl({"a1", "a2", "a3"}, o);
  const std::vector<std::pair<std::string, std::string>> sets{{"a1", "a2"}, {"a2", "a3"}, {"a1", "a3"}};
  std::vector<std::string> ids;
  for (int round = 0; round < 2; ++round)
    for (const auto& [x, y] : sets) {
      std::string script = "schema: 1\nmode: SIM\nactions:\n";
      for (const auto& who : {x, y, x, y})
        script += "  - name: sleep\n    actor: " + who + "\n    params: {ms: 15}\n";
      ids.push_back(cl.srv->submit(script, cl.config({x, y}, 42, 10, 3)));
    }
  for (const auto& id : ids) {
    ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(30000)));
    auto rec = cl.srv->store().load(id);
    EXPECT_EQ(rec.phase, "COMPLETE");
    for (const auto& s : rec.steps) EXPECT_EQ(s.verdict, Verdict::PASS) << s.detail.dump();
  }
  for (auto& a : cl.actors) EXPECT_EQ(a->max_active_steps(), 1u);

  auto log = cl.srv->log();
  auto bad = ait::testing::log_violation(log);
  EXPECT_FALSE(bad) << *bad;
  for (const auto& id : ids)
    EXPECT_EQ(std::count_if(log.begin(), log.end(), [&](auto& e) { return e.run_id == id && e.event == "DISPATCH"; }), 4);
}

TEST(Control, ClientRoundTrip) {
  Cluster cl({"a1"});
  control::Client c({"127.0.0.1", cl.srv->control_port()});
  auto id = c.submit(sleeps({5}), cl.config({"a1"}));
  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(5000)));
  auto st = c.status(id);
  EXPECT_EQ(st["phase"], "COMPLETE");
  EXPECT_THROW(c.status("nope"), UnknownRun);
  EXPECT_THROW(c.submit("schema: 1\nmode: SIM\nactions: []\n", cl.config({"a1"})), RejectedError);
  EXPECT_GE(c.list().size(), 2u);
}

// ---------------------------------------------------------------- bad peers


TEST(BadPeers, MalformedFramesKillOnlyTheirConnection) {
  Cluster cl({"a1"});
  const auto port = cl.srv->actor_port();
  // a run on the healthy actor stays in flight while bad peers come and go
  auto id = cl.srv->submit(sleeps({300, 300}), cl.config({"a1"}));

  RawPeer truncated(port);
  truncated.send({0, 0, 0, 100, '{', '"'});
  truncated.sock.shutdown();

  RawPeer oversized(port);
  oversized.send({0xFF, 0xFF, 0xFF, 0xFF, 0, 0});
  EXPECT_TRUE(oversized.closed_by_server());

  RawPeer unknown_first(port);
  unknown_first.send_body(R"({"payload":{},"seq":1,"type":"BOGUS","version":1})");
  EXPECT_TRUE(unknown_first.closed_by_server());

  RawPeer registered(port);
  ASSERT_TRUE(registered.register_as("bad1"));
  ASSERT_EQ(cl.srv->actor("bad1")->state, ActorState::IDLE);
  registered.send_body(R"({"payload":{},"seq":2,"type":"BOGUS","version":1})");
  EXPECT_TRUE(registered.closed_by_server());
  EXPECT_TRUE(eventually([&] { return cl.srv->actor("bad1")->state == ActorState::OFFLINE; }));

  RawPeer wrong_version(port);
  wrong_version.send_body(R"({"payload":{},"seq":1,"type":"REGISTER","version":2})");
  EXPECT_TRUE(wrong_version.closed_by_server());

  ASSERT_TRUE(cl.srv->wait_terminal(id, Millis(10000)));
  auto rec = cl.srv->store().load(id);
  EXPECT_EQ(rec.phase, "COMPLETE");
  EXPECT_EQ(verdicts(rec), (std::vector<Verdict>{Verdict::PASS, Verdict::PASS}));
  EXPECT_TRUE(rec.complete);
  EXPECT_EQ(cl.srv->actor("a1")->state, ActorState::IDLE);
  auto next = cl.run(sleeps({1}), cl.config({"a1"}));
  EXPECT_EQ(verdicts(next), std::vector<Verdict>{Verdict::PASS});
}
