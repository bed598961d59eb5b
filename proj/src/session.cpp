#include <cmath>

#include "ait/aicore.hpp"

namespace ait::aicore {

namespace {

Json::json_pointer ptr_of(const std::string& path) {
  try {
    return Json::json_pointer(path.empty() || path[0] == '/' ? path : "/" + path);
  } catch (const Json::exception& e) {
    throw ConfigError("bad request path '" + path + "': " + e.what());
  }
}

const Json& need(const Json& ai, const char* key) {
  if (!ai.contains(key)) throw ConfigError(std::string("ai.") + key + " is required");
  return ai[key];
}

std::string need_string(const Json& ai, const char* key) {
  const auto& v = need(ai, key);
  if (!v.is_string()) throw ConfigError(std::string("ai.") + key + " must be a string");
  return v.get<std::string>();
}

std::size_t need_count(const Json& ai, const char* key) {
  const auto& v = need(ai, key);
  if (!is_uint(v)) throw ConfigError(std::string("ai.") + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

Json request_template(const Json& ai) {
  if (!ai.contains("request")) return Json::object();
  if (!ai["request"].is_object()) throw ConfigError("ai.request must be a map");
  return ai["request"];
}

/// Writes each point coordinate into the request at the path named by the dim.
Json apply_point(Json request, const Json& point) {
  for (const auto& [name, v] : point.items()) request[ptr_of(name)] = v;
  return request;
}

Oracle point_oracle(const Json& ai, const SutCall& sut) {
  auto op = need_string(ai, "target");
  auto tmpl = request_template(ai);
  return [op, tmpl, &sut](const Json& point) { return sut(op, apply_point(tmpl, point)); };
}

ExplorationTrace sensitivity(const Json& ai, std::uint64_t seed, const SutCall& sut) {
  auto space = ParameterSpace::from_json(need(ai, "space"));
  const auto& baseline = need(ai, "baseline");
  std::map<std::string, std::vector<Json>> levels;
  if (ai.contains("levels")) {
    if (!ai["levels"].is_object()) throw ConfigError("ai.levels must be a map of lists");
    for (const auto& [k, v] : ai["levels"].items()) {
      if (!v.is_array()) throw ConfigError("ai.levels." + k + " must be a list");
      levels[k] = v.get<std::vector<Json>>();
    }
  }
  auto r = sensitivity_analysis(space, baseline, levels, point_oracle(ai, sut), Objective::from_json(need(ai, "score")),
                                seed);
  return std::move(r.trace);
}

ExplorationTrace fuzz(const Json& ai, std::uint64_t seed, const SutCall& sut) {
  auto space = ParameterSpace::from_json(need(ai, "space"));
  auto ga = GaParams::from_json(ai.value("ga", Json()));
  auto r = fuzz_genetic(space, Objective::from_json(need(ai, "score")), need_count(ai, "budget"), ga,
                        point_oracle(ai, sut), seed);
  return std::move(r.trace);
}

ExplorationTrace adversarial(const Json& ai, std::uint64_t seed, const SutCall& sut) {
  auto op = need_string(ai, "target");
  auto tmpl = request_template(ai);
  auto input_ptr = ptr_of(ai.value("input_path", std::string("symbols")));
  if (!tmpl.contains(input_ptr) || !tmpl.at(input_ptr).is_array())
    throw ConfigError("ai.request has no symbol list at the input path");

  std::vector<double> base;
  for (const auto& pair : tmpl.at(input_ptr)) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      throw ConfigError("input symbols must be [re, im] pairs");
    base.push_back(pair[0].get<double>());
    base.push_back(pair[1].get<double>());
  }

  AdvParams p;
  if (!need(ai, "norm_bound").is_number()) throw ConfigError("ai.norm_bound must be a number");
  p.norm_bound = ai["norm_bound"].get<double>();
  p.budget = need_count(ai, "budget");
  if (ai.contains("menu")) {
    if (!ai["menu"].is_array()) throw ConfigError("ai.menu must be a list");
    for (const auto& m : ai["menu"]) {
      if (!m.is_string()) throw ConfigError("ai.menu entries must be strings");
      p.impairment_menu.push_back(m.get<std::string>());
    }
  }
  p.decision_path = ai.value("decision_path", std::string("decided_indices"));
  p.confidence_path = ai.value("confidence_path", std::string("mean_confidence"));
  if (ai.contains("shrink_steps")) p.shrink_steps = need_count(ai, "shrink_steps");

  VectorOracle oracle = [&](std::span<const double> x) {
    Json req = tmpl;
    Json pairs = Json::array();
    for (std::size_t i = 0; i + 1 < x.size(); i += 2) pairs.push_back({x[i], x[i + 1]});
    req[input_ptr] = pairs;
    return sut(op, req);
  };
  auto r = adversarial_perturb(base, p, oracle, seed);
  return std::move(r.trace);
}

ExplorationTrace rl(const Json& ai, std::uint64_t seed, const SutCall& sut) {
  auto q = QParams::from_json(ai.value("q", Json()));
  auto env_name = need_string(ai, "env");
  if (env_name == "chain2") {
    ChainEnv env;
    return rl_explore(env, q, seed).trace;
  }
  if (env_name != "scheduler_demands") throw ConfigError("unknown RL environment '" + env_name + "'");
  SchedulerDemandEnv::Options o;
  const Json ep = ai.value("env_params", Json::object());
  if (!ep.is_object()) throw ConfigError("ai.env_params must be a map");
  try {
    if (ep.contains("ues")) o.ues = ep["ues"].get<std::size_t>();
    if (ep.contains("max_demand")) o.max_demand = ep["max_demand"].get<std::int64_t>();
    if (ep.contains("capacity")) o.capacity = ep["capacity"].get<std::int64_t>();
    if (ep.contains("tti_count")) o.tti_count = ep["tti_count"].get<std::int64_t>();
    if (ep.contains("priorities")) o.priorities = ep["priorities"].get<std::vector<double>>();
    if (ep.contains("start")) o.start = ep["start"].get<std::vector<std::int64_t>>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad ai.env_params: ") + e.what());
  }
  SchedulerDemandEnv env(o, [&](const Json& req) { return sut("schedule", req); });
  return rl_explore(env, q, seed).trace;
}

}  // namespace

ExplorationTrace run_session(const Json& ai, std::uint64_t seed, const SutCall& sut) {
  if (!ai.is_object()) throw ConfigError("ai must be a map");
  auto method = parse_method(need_string(ai, "method"));
  ExplorationTrace t;
  try {
    switch (method) {
      case Method::Sensitivity:
        t = sensitivity(ai, seed, sut);
        break;
      case Method::Fuzz:
        t = fuzz(ai, seed, sut);
        break;
      case Method::Adversarial:
        t = adversarial(ai, seed, sut);
        break;
      case Method::Rl:
        t = rl(ai, seed, sut);
        break;
    }
  } catch (OracleFailure& f) {
    f.partial.params["session"] = ai;
    throw;
  }
  t.params["session"] = ai;
  return t;
}

Json session_summary(const ExplorationTrace& trace) {
  Json s{{"method", to_string(trace.method)}, {"queries", trace.query_count()}, {"complete", trace.complete}};
  auto copy = [&](const char* key) {
    if (trace.summary.contains(key)) s[key] = trace.summary[key];
  };
  switch (trace.method) {
    case Method::Sensitivity:
      copy("index");
      copy("baseline_score");
      break;
    case Method::Fuzz:
      copy("best_fitness");
      copy("boundary_estimate");
      copy("generations");
      break;
    case Method::Adversarial:
      copy("found");
      copy("norm");
      break;
    case Method::Rl:
      copy("worst_state");
      copy("max_reward");
      copy("greedy_policy");
      break;
  }
  return s;
}

}  // namespace ait::aicore
