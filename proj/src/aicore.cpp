#include "ait/aicore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "ait/digest.hpp"

namespace ait::aicore {

namespace {

Json::json_pointer pointer(const std::string& path) {
  try {
    return Json::json_pointer(path.empty() || path[0] == '/' ? path : "/" + path);
  } catch (const Json::exception& e) {
    throw ConfigError("bad field path '" + path + "': " + e.what());
  }
}

/// Collects iterations and enforces the query budget.
class Recorder {
 public:
  Recorder(Method m, std::uint64_t seed, Json space, Json params, std::size_t budget) {
    trace.method = m;
    trace.seed = seed;
    trace.space = std::move(space);
    trace.params = std::move(params);
    trace.budget = budget;
  }

  bool can_query() const { return trace.iterations.size() < trace.budget; }
  std::size_t remaining() const { return trace.budget - trace.iterations.size(); }

  /// Invokes `call`, records the iteration, returns the response.
  template <class F>
  Json query(Json input, F&& call) {
    if (!can_query()) fail("query budget exhausted");
    Json response;
    try {
      response = call();
    } catch (const std::exception& e) {
      fail(e.what());
    }
    Json it{{"t", trace.iterations.size()}, {"input", std::move(input)}};
    try {
      it["response_digest"] = sha256_hex(canonical(response));
    } catch (const std::exception& e) {
      fail(std::string("unserializable oracle response: ") + e.what());
    }
    if (response.is_object() && response.contains("whitebox")) it["whitebox"] = response["whitebox"];
    trace.iterations.push_back(std::move(it));
    return response;
  }

  Json& last() { return trace.iterations.back(); }

  [[noreturn]] void fail(const std::string& why) {
    trace.complete = false;
    trace.error = why;
    throw OracleFailure(why, trace);
  }

  /// Score extraction failures are oracle failures.
  double score(const Objective& objective, const Json& response) {
    try {
      return objective.extract(response);
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }

  ExplorationTrace trace;
};

std::size_t dim_index(const ParameterSpace& space, const std::string& name) {
  for (std::size_t i = 0; i < space.dims.size(); ++i)
    if (space.dims[i].name == name) return i;
  throw ConfigError("unknown dimension '" + name + "'");
}

void check_value(const Dim& d, const Json& v) {
  switch (d.kind) {
    case Dim::Kind::Continuous:
      if (!v.is_number() || v.get<double>() < d.lo || v.get<double>() > d.hi)
        throw ConfigError("value for '" + d.name + "' outside [lo, hi]");
      break;
    case Dim::Kind::Integer:
      if (!v.is_number_integer() || v.get<double>() < d.lo || v.get<double>() > d.hi)
        throw ConfigError("value for '" + d.name + "' must be an integer in [lo, hi]");
      break;
    case Dim::Kind::Categorical:
      if (std::find(d.values.begin(), d.values.end(), v) == d.values.end())
        throw ConfigError("value for '" + d.name + "' is not one of its categories");
      break;
  }
}

// ---- GA genome helpers ----

using Genome = std::vector<double>;

Json decode(const ParameterSpace& space, const Genome& g) {
  Json p = Json::object();
  for (std::size_t i = 0; i < space.dims.size(); ++i) {
    const auto& d = space.dims[i];
    switch (d.kind) {
      case Dim::Kind::Continuous:
        p[d.name] = std::clamp(g[i], d.lo, d.hi);
        break;
      case Dim::Kind::Integer:
        p[d.name] = static_cast<std::int64_t>(std::llround(std::clamp(g[i], d.lo, d.hi)));
        break;
      case Dim::Kind::Categorical: {
        auto idx = static_cast<std::size_t>(std::clamp<long long>(std::llround(g[i]), 0, static_cast<long long>(d.values.size()) - 1));
        p[d.name] = d.values[idx];
        break;
      }
    }
  }
  return p;
}

Genome encode(const ParameterSpace& space, const Json& point) {
  Genome g(space.dims.size());
  for (std::size_t i = 0; i < space.dims.size(); ++i) {
    const auto& d = space.dims[i];
    if (!point.contains(d.name)) throw ConfigError("initial individual misses '" + d.name + "'");
    const auto& v = point[d.name];
    check_value(d, v);
    if (d.kind == Dim::Kind::Categorical)
      g[i] = static_cast<double>(std::find(d.values.begin(), d.values.end(), v) - d.values.begin());
    else
      g[i] = v.get<double>();
  }
  return g;
}

Genome random_genome(const ParameterSpace& space, CounterRng& rng) {
  Genome g(space.dims.size());
  for (std::size_t i = 0; i < space.dims.size(); ++i) {
    const auto& d = space.dims[i];
    switch (d.kind) {
      case Dim::Kind::Continuous:
        g[i] = rng.uniform(d.lo, d.hi);
        break;
      case Dim::Kind::Integer:
        g[i] = d.lo + static_cast<double>(rng.below(static_cast<std::uint64_t>(d.hi - d.lo) + 1));
        break;
      case Dim::Kind::Categorical:
        g[i] = static_cast<double>(rng.below(d.values.size()));
        break;
    }
  }
  return g;
}

double l2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Sensitivity:
      return "sensitivity";
    case Method::Fuzz:
      return "fuzz";
    case Method::Adversarial:
      return "adversarial";
    case Method::Rl:
      return "rl";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "sensitivity") return Method::Sensitivity;
  if (s == "fuzz") return Method::Fuzz;
  if (s == "adversarial") return Method::Adversarial;
  if (s == "rl") return Method::Rl;
  throw ConfigError("unknown AI method '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- space

void ParameterSpace::validate() const {
  std::set<std::string> names;
  for (const auto& d : dims) {
    if (d.name.empty()) throw ConfigError("dimension with empty name");
    if (!names.insert(d.name).second) throw ConfigError("duplicate dimension '" + d.name + "'");
    if (d.kind == Dim::Kind::Categorical) {
      if (d.values.empty()) throw ConfigError("categorical dimension '" + d.name + "' has no values");
    } else if (!(d.lo < d.hi)) {
      throw ConfigError("dimension '" + d.name + "' needs lo < hi");
    }
  }
}

const Dim* ParameterSpace::find(std::string_view name) const {
  for (const auto& d : dims)
    if (d.name == name) return &d;
  return nullptr;
}

Json ParameterSpace::to_json() const {
  Json arr = Json::array();
  for (const auto& d : dims) {
    Json j{{"name", d.name}};
    switch (d.kind) {
      case Dim::Kind::Continuous:
        j["kind"] = "continuous";
        j["lo"] = d.lo;
        j["hi"] = d.hi;
        break;
      case Dim::Kind::Integer:
        j["kind"] = "integer";
        j["lo"] = static_cast<std::int64_t>(d.lo);
        j["hi"] = static_cast<std::int64_t>(d.hi);
        break;
      case Dim::Kind::Categorical:
        j["kind"] = "categorical";
        j["values"] = d.values;
        break;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

ParameterSpace ParameterSpace::from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("space must be a list of dimensions");
  ParameterSpace s;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("kind") || !e["kind"].is_string())
      throw ConfigError("each dimension needs a string name and kind");
    Dim d;
    d.name = e["name"].get<std::string>();
    auto kind = e["kind"].get<std::string>();
    if (kind == "categorical") {
      d.kind = Dim::Kind::Categorical;
      if (!e.contains("values") || !e["values"].is_array()) throw ConfigError("categorical dimension needs values");
      d.values = e["values"].get<std::vector<Json>>();
    } else {
      if (kind == "continuous")
        d.kind = Dim::Kind::Continuous;
      else if (kind == "integer")
        d.kind = Dim::Kind::Integer;
      else
        throw ConfigError("unknown dimension kind '" + kind + "'");
      if (!e.contains("lo") || !e["lo"].is_number() || !e.contains("hi") || !e["hi"].is_number())
        throw ConfigError("dimension '" + d.name + "' needs numeric lo and hi");
      if (d.kind == Dim::Kind::Integer && (!e["lo"].is_number_integer() || !e["hi"].is_number_integer()))
        throw ConfigError("integer dimension '" + d.name + "' needs integer bounds");
      d.lo = e["lo"].get<double>();
      d.hi = e["hi"].get<double>();
    }
    s.dims.push_back(std::move(d));
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------- score

double Objective::extract(const Json& response) const {
  auto ptr = pointer(path);
  if (!response.contains(ptr)) throw OracleError("response has no field '" + path + "'");
  const auto& v = response.at(ptr);
  if (!v.is_number()) throw OracleError("response field '" + path + "' is not a number");
  double x = v.get<double>();
  if (target) return -std::abs(x - *target);
  return negate ? -x : x;
}

Json Objective::to_json() const {
  Json j{{"path", path}};
  if (target) j["target"] = *target;
  if (negate) j["negate"] = true;
  return j;
}

Objective Objective::from_json(const Json& j) {
  if (j.is_string()) return Objective{j.get<std::string>(), std::nullopt, false};
  if (!j.is_object() || !j.contains("path") || !j["path"].is_string()) throw ConfigError("score needs a string path");
  Objective s{j["path"].get<std::string>(), std::nullopt, false};
  if (j.contains("target")) {
    if (!j["target"].is_number()) throw ConfigError("score.target must be a number");
    s.target = j["target"].get<double>();
  }
  if (j.contains("negate")) {
    if (!j["negate"].is_boolean()) throw ConfigError("score.negate must be a boolean");
    s.negate = j["negate"].get<bool>();
  }
  pointer(s.path);
  return s;
}

// ---------------------------------------------------------------- trace

Json ExplorationTrace::to_json() const {
  Json j{{"method", to_string(method)}, {"seed", seed},           {"space", space},
         {"params", params},            {"budget", budget},       {"iterations", iterations},
         {"summary", summary},          {"complete", complete},   {"query_count", iterations.size()}};
  if (error) j["error"] = *error;
  return j;
}

ExplorationTrace ExplorationTrace::from_json(const Json& j) {
  ExplorationTrace t;
  try {
    t.method = parse_method(j.at("method").get<std::string>());
    t.seed = j.at("seed").get<std::uint64_t>();
    t.space = j.at("space");
    t.params = j.at("params");
    t.budget = j.at("budget").get<std::size_t>();
    t.iterations = j.at("iterations").get<std::vector<Json>>();
    t.summary = j.at("summary");
    t.complete = j.at("complete").get<bool>();
    if (j.contains("error")) t.error = j["error"].get<std::string>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed trace: ") + e.what());
  }
  return t;
}

std::string ExplorationTrace::digest() const { return sha256_hex(canonical(to_json())); }

// ---------------------------------------------------------------- sensitivity

SensitivityResult sensitivity_analysis(const ParameterSpace& space, const Json& baseline,
                                       const std::map<std::string, std::vector<Json>>& levels, const Oracle& oracle,
                                       const Objective& score, std::uint64_t seed) {
  space.validate();
  if (!baseline.is_object()) throw ConfigError("baseline must be an object");
  for (const auto& d : space.dims) {
    if (!baseline.contains(d.name)) throw ConfigError("baseline misses '" + d.name + "'");
    check_value(d, baseline[d.name]);
  }
  std::size_t planned = 0;
  bool hits_baseline = false;
  for (const auto& [name, lv] : levels) {
    const auto& d = space.dims[dim_index(space, name)];
    for (const auto& v : lv) {
      check_value(d, v);
      hits_baseline = hits_baseline || v == baseline[name];
    }
    planned += lv.size();
  }
  const std::size_t budget = planned + ((planned > 0 && !hits_baseline) ? 1 : 0);

  Json lv_json = Json::object();
  for (const auto& [k, v] : levels) lv_json[k] = v;
  Recorder rec(Method::Sensitivity, seed, space.to_json(),
               Json{{"baseline", baseline}, {"levels", lv_json}, {"score", score.to_json()}}, budget);

  std::optional<double> base_score;
  std::vector<std::vector<std::pair<Json, double>>> curves(space.dims.size());
  for (std::size_t di = 0; di < space.dims.size(); ++di) {
    const auto& d = space.dims[di];
    auto it = levels.find(d.name);
    if (it == levels.end()) continue;
    for (const auto& v : it->second) {
      Json point = baseline;
      point[d.name] = v;
      auto resp = rec.query(point, [&] { return oracle(point); });
      double s = rec.score(score, resp);
      rec.last()["dim"] = d.name;
      rec.last()["score"] = s;
      curves[di].push_back({v, s});
      if (!base_score && v == baseline[d.name]) base_score = s;
    }
  }
  if (!base_score && planned > 0) {
    auto resp = rec.query(baseline, [&] { return oracle(baseline); });
    base_score = rec.score(score, resp);
    rec.last()["dim"] = nullptr;
    rec.last()["score"] = *base_score;
  }

  SensitivityResult r;
  r.baseline_score = base_score.value_or(0.0);
  Json index = Json::object(), curve_json = Json::object();
  for (std::size_t di = 0; di < space.dims.size(); ++di) {
    double idx = 0;
    Json c = Json::array();
    for (const auto& [v, s] : curves[di]) {
      idx = std::max(idx, std::abs(s - r.baseline_score));
      c.push_back({v, s});
    }
    r.dims.push_back(space.dims[di].name);
    r.index.push_back(idx);
    index[space.dims[di].name] = idx;
    curve_json[space.dims[di].name] = c;
  }
  rec.trace.summary = {{"index", index}, {"baseline_score", r.baseline_score}, {"curves", curve_json}};
  r.trace = std::move(rec.trace);
  return r;
}

// ---------------------------------------------------------------- GA

Json GaParams::to_json() const {
  Json j{{"pop_size", pop_size},         {"mutation_rate", mutation_rate}, {"crossover_rate", crossover_rate},
         {"elitism", elitism},           {"tournament_k", tournament_k},   {"sigma_frac", sigma_frac}};
  if (!initial_population.empty()) j["initial_population"] = initial_population;
  return j;
}

GaParams GaParams::from_json(const Json& j) {
  GaParams g;
  if (j.is_null()) return g;
  if (!j.is_object()) throw ConfigError("ga must be an object");
  auto num = [&](const char* k, auto& out) {
    if (!j.contains(k)) return;
    if (!j[k].is_number()) throw ConfigError(std::string("ga.") + k + " must be a number");
    using T = std::decay_t<decltype(out)>;
    if constexpr (std::is_integral_v<T>) {
      if (!is_uint(j[k])) throw ConfigError(std::string("ga.") + k + " must be a non-negative integer");
    }
    out = j[k].get<T>();
  };
  num("pop_size", g.pop_size);
  num("mutation_rate", g.mutation_rate);
  num("crossover_rate", g.crossover_rate);
  num("elitism", g.elitism);
  num("tournament_k", g.tournament_k);
  num("sigma_frac", g.sigma_frac);
  if (j.contains("initial_population")) {
    if (!j["initial_population"].is_array()) throw ConfigError("ga.initial_population must be a list");
    g.initial_population = j["initial_population"].get<std::vector<Json>>();
  }
  return g;
}

FuzzResult fuzz_genetic(const ParameterSpace& space, const Objective& fitness, std::size_t budget, const GaParams& ga,
                        const Oracle& oracle, std::uint64_t seed) {
  space.validate();
  if (space.dims.empty()) throw ConfigError("fuzzing needs at least one dimension");
  if (ga.pop_size < 2) throw ConfigError("pop_size must be >= 2");
  if (budget < ga.pop_size) throw ConfigError("budget must be >= pop_size");
  if (ga.elitism >= ga.pop_size) throw ConfigError("elitism must be < pop_size");
  if (ga.tournament_k == 0) throw ConfigError("tournament_k must be >= 1");
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(ga.mutation_rate) || !in01(ga.crossover_rate)) throw ConfigError("rates must lie in [0, 1]");
  if (!(ga.sigma_frac >= 0.0)) throw ConfigError("sigma_frac must be >= 0");
  if (ga.initial_population.size() > ga.pop_size) throw ConfigError("initial_population larger than pop_size");

  auto rng = CounterRng::from_seed(seed);
  Recorder rec(Method::Fuzz, seed, space.to_json(), Json{{"ga", ga.to_json()}, {"fitness", fitness.to_json()}}, budget);

  struct Individual {
    Genome genome;
    double fitness;
  };
  std::size_t generation = 0;
  auto evaluate = [&](const Genome& g) {
    Json point = decode(space, g);
    auto resp = rec.query(point, [&] { return oracle(point); });
    double f = rec.score(fitness, resp);
    rec.last()["generation"] = generation;
    rec.last()["score"] = f;
    return f;
  };

  std::vector<Individual> pop;
  for (const auto& p : ga.initial_population) {
    auto g = encode(space, p);
    pop.push_back({g, evaluate(g)});
  }
  while (pop.size() < ga.pop_size) {
    auto g = random_genome(space, rng);
    pop.push_back({g, evaluate(g)});
  }

  auto best_of = [](const std::vector<Individual>& p) {
    std::size_t b = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i].fitness > p[b].fitness) b = i;
    return b;
  };
  auto tournament = [&](const std::vector<Individual>& p) {
    std::size_t winner = rng.below(p.size());
    for (std::size_t k = 1; k < ga.tournament_k; ++k) {
      std::size_t c = rng.below(p.size());
      if (p[c].fitness > p[winner].fitness || (p[c].fitness == p[winner].fitness && c < winner)) winner = c;
    }
    return winner;
  };

  FuzzResult r;
  r.best_per_generation.push_back(pop[best_of(pop)].fitness);

  while (rec.can_query()) {
    ++generation;
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pop[a].fitness > pop[b].fitness; });
    std::vector<Individual> next;
    for (std::size_t e = 0; e < ga.elitism && e < pop.size(); ++e) next.push_back(pop[order[e]]);

    while (next.size() < ga.pop_size && rec.can_query()) {
      const auto& p1 = pop[tournament(pop)].genome;
      const auto& p2 = pop[tournament(pop)].genome;
      Genome child = p1;
      if (rng.uniform() < ga.crossover_rate && child.size() > 1) {
        std::size_t cut = 1 + rng.below(child.size() - 1);
        for (std::size_t i = cut; i < child.size(); ++i) child[i] = p2[i];
      }
      for (std::size_t i = 0; i < child.size(); ++i) {
        if (!(rng.uniform() < ga.mutation_rate)) continue;
        const auto& d = space.dims[i];
        if (d.kind == Dim::Kind::Categorical)
          child[i] = static_cast<double>(rng.below(d.values.size()));
        else
          child[i] = std::clamp(child[i] + rng.normal() * ga.sigma_frac * (d.hi - d.lo), d.lo, d.hi);
      }
      next.push_back({child, evaluate(child)});
    }
    pop = std::move(next);
    r.best_per_generation.push_back(pop[best_of(pop)].fitness);
  }

  const auto& best = pop[best_of(pop)];
  r.best = decode(space, best.genome);
  r.best_fitness = best.fitness;
  rec.trace.summary = {{"best", r.best},
                       {"best_fitness", r.best_fitness},
                       {"best_per_generation", r.best_per_generation},
                       {"generations", generation + 1},
                       {"boundary_estimate", r.best}};
  r.trace = std::move(rec.trace);
  return r;
}

// ---------------------------------------------------------------- adversarial

Json AdvParams::to_json() const {
  return {{"norm_bound", norm_bound},       {"budget", budget},
          {"impairment_menu", impairment_menu}, {"decision_path", decision_path},
          {"confidence_path", confidence_path}, {"shrink_steps", shrink_steps}};
}

AdvResult adversarial_perturb(std::span<const double> base_input, const AdvParams& params, const VectorOracle& oracle,
                              std::uint64_t seed) {
  if (!(params.norm_bound > 0)) throw ConfigError("norm_bound must be > 0");
  for (const auto& k : params.impairment_menu)
    if (k != "cfo" && k != "iq_imbalance" && k != "interference") throw ConfigError("unknown impairment kind '" + k + "'");
  if (!params.impairment_menu.empty() && base_input.size() % 2 != 0)
    throw ConfigError("impairment directions need interleaved I/Q input");
  auto decision_ptr = pointer(params.decision_path);

  const std::vector<double> x(base_input.begin(), base_input.end());
  const std::size_t n = x.size();
  auto rng = CounterRng::from_seed(seed);
  Recorder rec(Method::Adversarial, seed, Json{{"input_dim", n}}, params.to_json(), params.budget);

  AdvResult r;
  auto summarize = [&] {
    rec.trace.summary = {{"found", r.found}, {"norm", r.norm}, {"queries", rec.trace.iterations.size()}};
    if (r.found) {
      rec.trace.summary["perturbation"] = r.perturbation;
      rec.trace.summary["adversarial_decision"] = r.adversarial_decision;
    }
    rec.trace.summary["base_decision"] = r.base_decision;
    r.queries = rec.trace.iterations.size();
    r.trace = std::move(rec.trace);
  };
  if (params.budget == 0 || n == 0) {
    summarize();
    return r;
  }

  auto ask = [&](std::span<const double> input, Json meta) {
    auto resp = rec.query(std::move(meta), [&] { return oracle(input); });
    if (!resp.contains(decision_ptr)) rec.fail("response has no field '" + params.decision_path + "'");
    return resp.at(decision_ptr);
  };
  r.base_decision = ask(x, Json{{"probe", "base"}, {"norm", 0.0}});

  std::optional<std::vector<double>> best_dir;  // unit vector
  double best_norm = params.norm_bound;
  auto at = [&](const std::vector<double>& u, double mag) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + mag * u[i];
    return p;
  };
  // Keep one query for the final verification.
  auto room = [&] { return rec.remaining() > 1; };

  std::size_t attempt = 0;
  while (room()) {
    std::vector<double> u(n);
    std::string probe = "random";
    const bool use_menu = !params.impairment_menu.empty() && attempt % 2 == 1;
    if (use_menu) {
      probe = params.impairment_menu[(attempt / 2) % params.impairment_menu.size()];
      std::vector<Complex> sym(n / 2);
      for (std::size_t k = 0; k < sym.size(); ++k) sym[k] = Complex(x[2 * k], x[2 * k + 1]);
      Impairment imp;
      if (probe == "cfo")
        imp = Cfo{rng.uniform(-std::numbers::pi, std::numbers::pi)};
      else if (probe == "iq_imbalance")
        imp = IqImbalance{rng.uniform(-6.0, 6.0), rng.uniform(-45.0, 45.0)};
      else
        imp = Interference{1.0, rng.uniform() < 0.5 ? Tail::Gaussian : Tail::HeavyTail};
      auto out = apply_impairment(sym, imp, rng);
      for (std::size_t k = 0; k < sym.size(); ++k) {
        u[2 * k] = out[k].real() - x[2 * k];
        u[2 * k + 1] = out[k].imag() - x[2 * k + 1];
      }
    } else {
      for (auto& v : u) v = rng.normal();
    }
    ++attempt;
    double len = l2(u);
    if (!(len > 0)) continue;
    for (auto& v : u) v /= len;

    // Only magnitudes below the current best are of interest.
    double hi = best_norm;
    auto probe_pt = at(u, hi);
    auto dec = ask(probe_pt, Json{{"probe", probe}, {"norm", hi}});
    if (dec == r.base_decision) continue;
    double lo = 0.0;
    for (std::size_t s = 0; s < params.shrink_steps && room(); ++s) {
      double mid = 0.5 * (lo + hi);
      auto d = ask(at(u, mid), Json{{"probe", "shrink"}, {"norm", mid}});
      if (d == r.base_decision)
        lo = mid;
      else
        hi = mid;
    }
    if (!best_dir || hi < best_norm) {
      best_dir = u;
      best_norm = hi;
    }
  }

  if (best_dir && rec.can_query()) {
    auto pt = at(*best_dir, best_norm);
    std::vector<double> delta(n);
    for (std::size_t i = 0; i < n; ++i) delta[i] = pt[i] - x[i];
    double norm = l2(delta);
    auto dec = ask(pt, Json{{"probe", "verify"}, {"norm", norm}});
    if (dec != r.base_decision && norm <= params.norm_bound) {
      r.found = true;
      r.perturbation = std::move(delta);
      r.norm = norm;
      r.adversarial_decision = dec;
    }
  }
  summarize();
  return r;
}

// ---------------------------------------------------------------- RL

double QParams::epsilon(std::size_t episode) const {
  double span = decay_fraction * static_cast<double>(episodes);
  double frac = span > 0 ? std::min(1.0, static_cast<double>(episode) / span) : 1.0;
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

Json QParams::to_json() const {
  return {{"alpha", alpha},
          {"gamma", gamma},
          {"episodes", episodes},
          {"episode_len", episode_len},
          {"epsilon_start", epsilon_start},
          {"epsilon_end", epsilon_end},
          {"decay_fraction", decay_fraction}};
}

QParams QParams::from_json(const Json& j) {
  QParams q;
  if (j.is_null()) return q;
  if (!j.is_object()) throw ConfigError("q must be an object");
  auto num = [&](const char* k, double& out) {
    if (!j.contains(k)) return;
    if (!j[k].is_number()) throw ConfigError(std::string("q.") + k + " must be a number");
    out = j[k].get<double>();
  };
  auto count = [&](const char* k, std::size_t& out) {
    if (!j.contains(k)) return;
    if (!is_uint(j[k])) throw ConfigError(std::string("q.") + k + " must be a non-negative integer");
    out = j[k].get<std::size_t>();
  };
  num("alpha", q.alpha);
  num("gamma", q.gamma);
  count("episodes", q.episodes);
  count("episode_len", q.episode_len);
  if (j.contains("epsilon")) {
    num("epsilon", q.epsilon_start);
    q.epsilon_end = q.epsilon_start;
  }
  num("epsilon_start", q.epsilon_start);
  num("epsilon_end", q.epsilon_end);
  num("decay_fraction", q.decay_fraction);
  return q;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t b = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[b]) b = i;
  return b;
}

RlResult rl_explore(Environment& env, const QParams& q, std::uint64_t seed) {
  const auto ns = env.num_states(), na = env.num_actions();
  if (ns == 0 || na == 0) throw ConfigError("state and action spaces must be non-empty");
  if (q.episodes == 0) throw ConfigError("episodes must be >= 1");
  if (q.episode_len == 0) throw ConfigError("episode_len must be >= 1");
  if (!(q.alpha > 0 && q.alpha <= 1)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(q.gamma >= 0 && q.gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(q.epsilon_start) || !in01(q.epsilon_end) || !in01(q.decay_fraction))
    throw ConfigError("epsilon schedule values must lie in [0, 1]");

  auto rng = CounterRng::from_seed(seed);
  const std::size_t budget = (q.episodes + 1) * q.episode_len;
  Recorder rec(Method::Rl, seed, env.describe(), Json{{"q", q.to_json()}}, budget);

  RlResult r;
  r.q.assign(ns, std::vector<double>(na, 0.0));
  r.max_reward = -INFINITY;

  auto take = [&](std::size_t s, std::size_t a, std::size_t episode, bool rollout) {
    auto out = rec.query(Json{{"state", env.describe_state(s)}, {"action", a}}, [&] {
      auto st = env.step(s, a);
      return Json{{"next_state", st.next_state}, {"reward", st.reward}, {"response", st.response}};
    });
    auto next = out["next_state"].get<std::size_t>();
    double reward = out["reward"].get<double>();
    auto& it = rec.last();
    it["state"] = s;
    it["action"] = a;
    it["reward"] = reward;
    it["next_state"] = next;
    it["episode"] = episode;
    it["score"] = reward;
    if (rollout) it["rollout"] = true;
    if (reward > r.max_reward) {
      r.max_reward = reward;
      r.max_reward_state = next;
    }
    return std::pair{next, reward};
  };

  for (std::size_t e = 0; e < q.episodes; ++e) {
    double eps = q.epsilon(e);
    std::size_t s = env.start_state();
    for (std::size_t t = 0; t < q.episode_len; ++t) {
      std::size_t a;
      if (eps > 0 && rng.uniform() < eps)
        a = rng.below(na);
      else
        a = argmax(r.q[s]);
      auto [next, reward] = take(s, a, e, false);
      double target = reward + q.gamma * r.q[next][argmax(r.q[next])];
      r.q[s][a] += q.alpha * (target - r.q[s][a]);
      s = next;
    }
  }

  r.greedy_policy.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) r.greedy_policy[s] = argmax(r.q[s]);

  r.max_rollout_reward = -INFINITY;
  std::size_t s = env.start_state();
  for (std::size_t t = 0; t < q.episode_len; ++t) {
    std::size_t a = r.greedy_policy[s];
    auto [next, reward] = take(s, a, q.episodes, true);
    r.worst_trajectory.push_back(
        Json{{"state", env.describe_state(s)}, {"action", a}, {"reward", reward}, {"next_state", env.describe_state(next)}});
    r.max_rollout_reward = std::max(r.max_rollout_reward, reward);
    s = next;
  }

  rec.trace.summary = {{"greedy_policy", r.greedy_policy},
                       {"q", r.q},
                       {"worst_trajectory", r.worst_trajectory},
                       {"max_rollout_reward", r.max_rollout_reward},
                       {"max_reward", r.max_reward},
                       {"worst_state", env.describe_state(r.max_reward_state)}};
  r.trace = std::move(rec.trace);
  return r;
}

EnvStep ChainEnv::step(std::size_t s, std::size_t a) {
  static constexpr double kReward[2][2] = {{1.0, 0.0}, {0.0, 2.0}};
  static constexpr std::size_t kNext[2][2] = {{0, 1}, {0, 1}};
  if (s > 1 || a > 1) throw OracleError("chain: state/action out of range");
  return {kNext[s][a], kReward[s][a], Json{{"reward", kReward[s][a]}}};
}

Json ChainEnv::describe() const { return {{"env", "chain2"}, {"states", 2}, {"actions", 2}}; }

SchedulerDemandEnv::SchedulerDemandEnv(Options opt, std::function<Json(const Json&)> scheduler)
    : opt_(std::move(opt)), scheduler_(std::move(scheduler)) {
  if (opt_.ues == 0 || opt_.ues > 6) throw ConfigError("scheduler env supports 1..6 UEs");
  if (opt_.max_demand < 1 || opt_.max_demand > 64) throw ConfigError("max_demand must lie in [1, 64]");
  if (opt_.capacity < 1) throw ConfigError("capacity must be >= 1");
  if (opt_.priorities.empty()) opt_.priorities.assign(opt_.ues, 1.0);
  if (opt_.priorities.size() != opt_.ues) throw ConfigError("priorities must have one entry per UE");
  if (opt_.start.empty()) opt_.start.assign(opt_.ues, 1);
  if (opt_.start.size() != opt_.ues) throw ConfigError("start must have one entry per UE");
  for (auto d : opt_.start)
    if (d < 1 || d > opt_.max_demand) throw ConfigError("start demand out of range");
}

std::size_t SchedulerDemandEnv::num_states() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < opt_.ues; ++i) n *= static_cast<std::size_t>(opt_.max_demand);
  return n;
}

std::size_t SchedulerDemandEnv::start_state() const { return state_of(opt_.start); }

std::vector<std::int64_t> SchedulerDemandEnv::demands(std::size_t s) const {
  std::vector<std::int64_t> d(opt_.ues);
  const auto m = static_cast<std::size_t>(opt_.max_demand);
  for (std::size_t i = opt_.ues; i-- > 0;) {
    d[i] = static_cast<std::int64_t>(s % m) + 1;
    s /= m;
  }
  return d;
}

std::size_t SchedulerDemandEnv::state_of(std::span<const std::int64_t> demands) const {
  std::size_t s = 0;
  for (auto d : demands) s = s * static_cast<std::size_t>(opt_.max_demand) + static_cast<std::size_t>(d - 1);
  return s;
}

std::size_t SchedulerDemandEnv::transition(std::size_t s, std::size_t a) const {
  auto d = demands(s);
  if (a > 0) {
    auto ue = (a - 1) / 2;
    bool inc = (a - 1) % 2 == 0;
    d[ue] = std::clamp<std::int64_t>(d[ue] + (inc ? 1 : -1), 1, opt_.max_demand);
  }
  return state_of(d);
}

Json SchedulerDemandEnv::request_for(std::size_t s) const {
  return {{"ue_demands", demands(s)}, {"priorities", opt_.priorities}, {"capacity", opt_.capacity}, {"tti_count", opt_.tti_count}};
}

EnvStep SchedulerDemandEnv::step(std::size_t s, std::size_t a) {
  if (s >= num_states() || a >= num_actions()) throw OracleError("scheduler env: state/action out of range");
  auto next = transition(s, a);
  auto resp = scheduler_(request_for(next));
  if (!resp.contains("qos_score") || !resp["qos_score"].is_number()) throw OracleError("scheduler response lacks qos_score");
  return {next, -resp["qos_score"].get<double>(), resp};
}

Json SchedulerDemandEnv::describe() const {
  return {{"env", "scheduler_demands"}, {"ues", opt_.ues},        {"max_demand", opt_.max_demand},
          {"capacity", opt_.capacity},  {"priorities", opt_.priorities}, {"tti_count", opt_.tti_count},
          {"start", opt_.start},        {"states", num_states()}, {"actions", num_actions()}};
}

Json SchedulerDemandEnv::describe_state(std::size_t s) const { return demands(s); }

}  // namespace ait::aicore
