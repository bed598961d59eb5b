// ait: server, actor and SUT daemons plus run management, in one binary.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "ait/actor.hpp"
#include "ait/control.hpp"
#include "ait/report.hpp"
#include "ait/script.hpp"
#include "ait/server.hpp"
#include "ait/sut.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kRunFailed = 1,
  kInvalid = 2,
  kUnreachable = 3,
  kUnknownRun = 4,
  kUnreadable = 5,
  kUsage = 6,
};

struct Flags {
  int server_port = 7700;
  int control_port = 7701;
  std::string server_addr = "127.0.0.1:7700";
  std::string sut_addr = "127.0.0.1:7800";
  std::string store = "ait-store";
  std::string id;
  std::optional<std::uint64_t> seed_override;
  std::string format = "text";
  bool follow = false;
  double health_period = 2.0;
  std::string probe = "simulated";
  unsigned max_parallel = 4;
  double setup_timeout = 30.0;
  std::string bind_host = "127.0.0.1";
  std::string verbosity = "info";
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) return std::nullopt;
  return ss.str();
}

void block_signals(sigset_t& set) {
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

int wait_for_signal(sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

ait::net::Endpoint control_endpoint(const Flags& f) {
  auto ep = ait::net::parse_endpoint(f.server_addr);
  ep.port = static_cast<std::uint16_t>(f.control_port);
  return ep;
}

void print_findings(const ait::script::ValidationReport& r, std::ostream& out) {
  for (const auto& f : r.findings) {
    out << ait::script::to_string(f.severity) << " " << f.code;
    if (f.action_index) out << " action " << *f.action_index;
    out << ": " << f.reason << "\n";
  }
}

std::string apply_seed_override(const std::string& config_text, const Flags& f) {
  if (!f.seed_override) return config_text;
  auto cfg = ait::script::parse_config(config_text);
  cfg.run_seed = *f.seed_override;
  return ait::script::serialize(cfg);
}

bool run_ok(const ait::Json& status) {
  if (status["phase"] != "COMPLETE") return false;
  for (const auto& v : status["verdicts"])
    if (v == "FAIL" || v == "ERROR") return false;
  return true;
}

int follow_run(ait::control::Client& client, const std::string& run_id, const Flags& f) {
  ait::Json st;
  for (;;) {
    st = client.status(run_id);
    auto phase = st["phase"].get<std::string>();
    if (phase != "QUEUED" && phase != "RUNNING") break;
    std::this_thread::sleep_for(std::chrono::seconds(1));
  }
  try {
    ait::report::RunStore store(f.store);
    auto rec = store.load(run_id);
    std::cout << ait::report::render(rec, ait::report::parse_format(f.format));
    if (f.format == "structured") std::cout << "\n";
  } catch (const ait::Error&) {
    std::cout << st.dump(2) << "\n";
  }
  return run_ok(st) ? kOk : kRunFailed;
}

int cmd_validate(const std::string& path) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "cannot read " << path << "\n";
    return kUnreadable;
  }
  if (path.ends_with(".config.yaml")) {
    try {
      ait::script::parse_config(*text);
      std::cout << "ok\n";
      return kOk;
    } catch (const ait::Error& e) {
      std::cout << "error " << e.code() << ": " << e.what() << "\n";
      return kInvalid;
    }
  }
  auto report = ait::script::validate_document(*text);
  print_findings(report, std::cout);
  if (!report.ok()) return kInvalid;
  std::cout << "ok\n";
  return kOk;
}

int cmd_run(const std::string& script_path, const std::string& config_path, const Flags& f) {
  auto script = read_file(script_path);
  auto config = read_file(config_path);
  if (!script || !config) {
    std::cerr << "cannot read " << (!script ? script_path : config_path) << "\n";
    return kUnreadable;
  }
  auto report = ait::script::validate_document(*script);
  if (!report.ok()) {
    print_findings(report, std::cout);
    return kInvalid;
  }
  std::string cfg_text;
  try {
    cfg_text = apply_seed_override(*config, f);
  } catch (const ait::Error& e) {
    std::cout << "error " << e.code() << ": " << e.what() << "\n";
    return kInvalid;
  }
  std::optional<ait::control::Client> client;
  try {
    client.emplace(control_endpoint(f));
  } catch (const ait::Error& e) {
    std::cerr << "server unreachable: " << e.what() << "\n";
    return kUnreachable;
  }
  std::string run_id;
  try {
    run_id = client->submit(*script, cfg_text);
  } catch (const ait::RejectedError& e) {
    std::cout << e.run_id << " FAILED_SETUP\n";
    for (const auto& r : e.reasons) std::cout << "  " << r << "\n";
    return kRunFailed;
  }
  std::cout << run_id << "\n";
  if (!f.follow) return kOk;
  return follow_run(*client, run_id, f);
}

int cmd_status(const std::optional<std::string>& run_id, const Flags& f) {
  std::optional<ait::control::Client> client;
  try {
    client.emplace(control_endpoint(f));
  } catch (const ait::Error& e) {
    std::cerr << "server unreachable: " << e.what() << "\n";
    return kUnreachable;
  }
  auto actors_col = [](const ait::Json& actors) {
    std::string s;
    for (const auto& a : actors) {
      if (!s.empty()) s += ",";
      s += a["id"].get<std::string>() + ":" + a["state"].get<std::string>();
      if (a["health"].is_object())
        s += fmt::format("(cpu={:.0f})", a["health"]["cpu_pct"].get<double>());
    }
    return s.empty() ? std::string("-") : s;
  };
  auto row = [&](const ait::Json& s) {
    std::cout << fmt::format("{:<26}  {:<12}  {:>4}/{:<4}  {}\n", s["run_id"].get<std::string>(),
                             s["phase"].get<std::string>(), s["cursor"].get<std::size_t>(),
                             s["plan_size"].get<std::size_t>(), actors_col(s["actors"]));
  };
  std::cout << fmt::format("{:<26}  {:<12}  {:>9}  {}\n", "RUN_ID", "PHASE", "CURSOR", "ACTORS");
  if (run_id) {
    try {
      row(client->status(*run_id));
    } catch (const ait::UnknownRun& e) {
      std::cerr << e.what() << "\n";
      return kUnknownRun;
    }
    return kOk;
  }
  auto all = client->list();
  for (const auto& s : all["runs"]) row(s);
  return kOk;
}

int cmd_abort(const std::string& run_id, const Flags& f) {
  try {
    ait::control::Client client(control_endpoint(f));
    client.abort(run_id);
  } catch (const ait::UnknownRun& e) {
    std::cerr << e.what() << "\n";
    return kUnknownRun;
  } catch (const ait::AdapterError& e) {
    std::cerr << "server unreachable: " << e.what() << "\n";
    return kUnreachable;
  }
  std::cout << "abort requested\n";
  return kOk;
}

int cmd_report(const std::string& run_id, const Flags& f) {
  ait::report::RunStore store(f.store);
  try {
    auto rec = store.load(run_id);
    std::cout << ait::report::render(rec, ait::report::parse_format(f.format));
    if (f.format == "structured") std::cout << "\n";
  } catch (const ait::UnknownRun& e) {
    std::cerr << e.what() << "\n";
    return kUnknownRun;
  }
  return kOk;
}

int cmd_replay(const std::string& run_id, const Flags& f) {
  ait::report::RunStore store(f.store);
  std::pair<std::string, std::string> docs;
  try {
    docs = ait::report::replay(store.load(run_id));
  } catch (const ait::UnknownRun& e) {
    std::cerr << e.what() << "\n";
    return kUnknownRun;
  } catch (const ait::IncompleteRecord& e) {
    std::cerr << e.what() << "\n";
    return kRunFailed;
  }
  std::optional<ait::control::Client> client;
  try {
    client.emplace(control_endpoint(f));
  } catch (const ait::Error& e) {
    std::cerr << "server unreachable: " << e.what() << "\n";
    return kUnreachable;
  }
  std::string id;
  try {
    id = client->submit(docs.first, apply_seed_override(docs.second, f), run_id);
  } catch (const ait::RejectedError& e) {
    std::cout << e.run_id << " FAILED_SETUP\n";
    for (const auto& r : e.reasons) std::cout << "  " << r << "\n";
    return kRunFailed;
  }
  std::cout << id << "\n";
  if (!f.follow) return kOk;
  return follow_run(*client, id, f);
}

int cmd_server(const Flags& f) {
  sigset_t set;
  block_signals(set);
  ait::server::ServerOptions o;
  o.actor_bind = {f.bind_host, static_cast<std::uint16_t>(f.server_port)};
  o.control_bind = {f.bind_host, static_cast<std::uint16_t>(f.control_port)};
  o.store_root = f.store;
  o.max_parallel_runs = f.max_parallel;
  o.setup_timeout = ait::Millis(static_cast<std::int64_t>(f.setup_timeout * 1000));
  ait::server::Server server(o);
  server.start();
  std::cout << "server listening: actors " << server.actor_port() << ", control " << server.control_port() << std::endl;
  wait_for_signal(set);
  server.stop();
  return kOk;
}

int cmd_actor(const Flags& f) {
  sigset_t set;
  block_signals(set);
  ait::actor::ActorRuntimeConfig cfg;
  cfg.id = f.id;
  cfg.server = ait::net::parse_endpoint(f.server_addr);
  cfg.sut = ait::net::parse_endpoint(f.sut_addr);
  cfg.health_period = ait::Millis(static_cast<std::int64_t>(f.health_period * 1000));
  cfg.probe = f.probe == "real" ? ait::actor::ProbeMode::Real : ait::actor::ProbeMode::Simulated;
  ait::actor::Actor actor(cfg);
  actor.start();
  std::cout << "actor " << cfg.id << " registered with " << cfg.server.str() << std::endl;
  std::thread waiter([&] {
    actor.wait();
    kill(getpid(), SIGTERM);
  });
  wait_for_signal(set);
  actor.stop();
  waiter.join();
  return kOk;
}

int cmd_sut(const Flags& f) {
  sigset_t set;
  block_signals(set);
  ait::sut::SutServer sut(ait::net::parse_endpoint(f.sut_addr));
  std::cout << "sut " << ait::sut::kSutVersion << " listening on " << sut.port() << std::endl;
  wait_for_signal(set);
  sut.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ait: distributed AI-enabled RAN testing"};
  app.require_subcommand(1);
  Flags f;

  auto server_port = [&](CLI::App* c) {
    c->add_option("--server-port", f.server_port, "actor listen port")->envname("AIT_SERVER_PORT")->check(CLI::Range(0, 65535));
  };
  auto control_port = [&](CLI::App* c) {
    c->add_option("--control-port", f.control_port, "control listen port")->envname("AIT_CONTROL_PORT")->check(CLI::Range(0, 65535));
  };
  auto server_addr = [&](CLI::App* c) {
    c->add_option("--server-addr", f.server_addr, "server host:port")->envname("AIT_SERVER_ADDR");
  };
  auto sut_addr = [&](CLI::App* c) { c->add_option("--sut-addr", f.sut_addr, "SUT host:port")->envname("AIT_SUT_ADDR"); };
  auto store = [&](CLI::App* c) { c->add_option("--store", f.store, "run store directory")->envname("AIT_STORE"); };
  auto format = [&](CLI::App* c) {
    c->add_option("--format", f.format, "report format")->envname("AIT_FORMAT")->check(CLI::IsMember({"text", "structured"}));
  };
  auto follow = [&](CLI::App* c) { c->add_flag("--follow", f.follow, "poll until the run ends")->envname("AIT_FOLLOW"); };
  auto seed = [&](CLI::App* c) {
    c->add_option("--seed-override", f.seed_override, "replace the config's run_seed")->envname("AIT_SEED_OVERRIDE");
  };
  app.add_option("--log-level", f.verbosity, "trace|debug|info|warn|error|off")->envname("AIT_LOG_LEVEL");

  auto* server = app.add_subcommand("server", "orchestration server");
  server->require_subcommand(1);
  auto* server_start = server->add_subcommand("start", "serve actors and the control port");
  server_port(server_start);
  control_port(server_start);
  store(server_start);
  server_start->add_option("--bind", f.bind_host, "listen host")->envname("AIT_BIND");
  server_start->add_option("--max-parallel-runs", f.max_parallel, "server-wide run limit")->envname("AIT_MAX_PARALLEL_RUNS");
  server_start->add_option("--setup-timeout", f.setup_timeout, "seconds to wait for actors")->envname("AIT_SETUP_TIMEOUT");

  auto* actor = app.add_subcommand("actor", "test actor");
  actor->require_subcommand(1);
  auto* actor_start = actor->add_subcommand("start", "register with the server and execute steps");
  actor_start->add_option("--id", f.id, "actor id")->envname("AIT_ID")->required();
  server_addr(actor_start);
  sut_addr(actor_start);
  actor_start->add_option("--health-period", f.health_period, "seconds between health reports")
      ->envname("AIT_HEALTH_PERIOD")
      ->check(CLI::PositiveNumber);
  actor_start->add_option("--probe", f.probe, "health probe mode")
      ->envname("AIT_PROBE")
      ->check(CLI::IsMember({"real", "simulated"}));

  auto* sut = app.add_subcommand("sut", "bundled system under test");
  sut->require_subcommand(1);
  auto* sut_start = sut->add_subcommand("start", "serve scheduler and demodulator requests");
  sut_addr(sut_start);

  std::string script_path, config_path, run_id;
  std::optional<std::string> opt_run_id;
  auto* run = app.add_subcommand("run", "validate and submit a test script");
  run->add_option("script", script_path, "test script")->required();
  run->add_option("config", config_path, "test configuration")->required();
  server_addr(run);
  control_port(run);
  follow(run);
  store(run);
  format(run);
  seed(run);

  auto* status = app.add_subcommand("status", "show one run or list all runs");
  status->add_option("run_id", opt_run_id, "run id");
  server_addr(status);
  control_port(status);

  auto* abort = app.add_subcommand("abort", "abort a run");
  abort->add_option("run_id", run_id)->required();
  server_addr(abort);
  control_port(abort);

  auto* report = app.add_subcommand("report", "render a stored run");
  report->add_option("run_id", run_id)->required();
  store(report);
  format(report);

  auto* replay = app.add_subcommand("replay", "resubmit a stored run with its original seed");
  replay->add_option("run_id", run_id)->required();
  store(replay);
  server_addr(replay);
  control_port(replay);
  follow(replay);
  format(replay);
  seed(replay);

  auto* validate = app.add_subcommand("validate", "offline integrity check");
  validate->add_option("script", script_path, "test script or .config.yaml")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("ait"));
  spdlog::set_level(spdlog::level::from_str(f.verbosity));

  try {
    if (*server_start) return cmd_server(f);
    if (*actor_start) return cmd_actor(f);
    if (*sut_start) return cmd_sut(f);
    if (*run) return cmd_run(script_path, config_path, f);
    if (*status) return cmd_status(opt_run_id, f);
    if (*abort) return cmd_abort(run_id, f);
    if (*report) return cmd_report(run_id, f);
    if (*replay) return cmd_replay(run_id, f);
    if (*validate) return cmd_validate(script_path);
  } catch (const ait::AdapterError& e) {
    std::cerr << "server unreachable: " << e.what() << "\n";
    return kUnreachable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
  return kUsage;
}
