#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ait/canonical.hpp"
#include "ait/error.hpp"
#include "ait/impairment.hpp"
#include "ait/rng.hpp"

namespace ait::aicore {

enum class Method { Sensitivity, Fuzz, Adversarial, Rl };

std::string_view to_string(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view s);

struct Dim {
  enum class Kind { Continuous, Integer, Categorical };
  std::string name;
  Kind kind = Kind::Continuous;
  double lo = 0;
  double hi = 1;
  std::vector<Json> values;  // categorical only
};

struct ParameterSpace {
  std::vector<Dim> dims;

  /// Throws ConfigError: lo >= hi, empty categorical values, duplicate names.
  void validate() const;
  const Dim* find(std::string_view name) const;
  Json to_json() const;
  /// Accepts [{"name":..,"kind":"continuous"|"integer"|"categorical","lo":..,"hi":..,"values":[..]}].
  static ParameterSpace from_json(const Json& j);
};

/// Scalar score extracted from an oracle response: value at `path` (JSON
/// pointer without the leading slash, e.g. "kpi/0/loss_frac"); with
/// `target`, the score is -|value - target|; with `negate`, -value.
struct Objective {
  std::string path;
  std::optional<double> target;
  bool negate = false;

  double extract(const Json& response) const;
  Json to_json() const;
  static Objective from_json(const Json& j);
};

/// Black-box query: a point (JSON object keyed by dim name) in, the SUT
/// response document out.
using Oracle = std::function<Json(const Json& point)>;

/// Replayable record of one AI testing session. Iteration "t" is a logical
/// query ordinal, so equal inputs give byte-identical traces.
struct ExplorationTrace {
  Method method = Method::Sensitivity;
  std::uint64_t seed = 0;
  Json space = Json::array();
  Json params = Json::object();
  std::size_t budget = 0;
  std::vector<Json> iterations;
  Json summary = Json::object();
  bool complete = true;
  std::optional<std::string> error;

  std::size_t query_count() const { return iterations.size(); }
  Json to_json() const;
  static ExplorationTrace from_json(const Json& j);
  /// SHA-256 (hex) of the canonical serialization.
  std::string digest() const;
};

/// The oracle failed mid-session; `partial` holds everything up to the failure.
struct OracleFailure : OracleError {
  OracleFailure(const std::string& what, ExplorationTrace partial) : OracleError(what), partial(std::move(partial)) {}
  ExplorationTrace partial;
};

// ---- one-at-a-time sensitivity ----

struct SensitivityResult {
  std::vector<std::string> dims;
  std::vector<double> index;
  double baseline_score = 0;
  ExplorationTrace trace;
};

/// index_d = max |score(x) - score(baseline)| over the sweep of dim d with
/// every other dim at its baseline value. Dims without levels get 0 and
/// cost no queries. The baseline score is taken from the sweep point equal
/// to the baseline when there is one.
SensitivityResult sensitivity_analysis(const ParameterSpace& space, const Json& baseline,
                                       const std::map<std::string, std::vector<Json>>& levels, const Oracle& oracle,
                                       const Objective& score, std::uint64_t seed);

// ---- genetic fuzzing ----

struct GaParams {
  std::size_t pop_size = 20;
  double mutation_rate = 0.1;
  double crossover_rate = 0.9;
  std::size_t elitism = 1;
  std::size_t tournament_k = 3;
  /// Gaussian mutation sigma as a fraction of each dim's range.
  double sigma_frac = 0.05;
  /// Optional explicit starting population (points); padded randomly.
  std::vector<Json> initial_population;

  Json to_json() const;
  static GaParams from_json(const Json& j);
};

struct FuzzResult {
  Json best;  // point
  double best_fitness = 0;
  std::vector<double> best_per_generation;
  ExplorationTrace trace;
};

/// Throws ConfigError for pop_size < 2, budget < pop_size, elitism >=
/// pop_size, rates outside [0,1], or tournament_k == 0.
FuzzResult fuzz_genetic(const ParameterSpace& space, const Objective& fitness, std::size_t budget, const GaParams& ga,
                        const Oracle& oracle, std::uint64_t seed);

// ---- gradient-free adversarial search ----

/// Oracle over a flat real input vector; the response must carry a decision
/// (any JSON value) and a confidence scalar at the configured paths.
using VectorOracle = std::function<Json(std::span<const double> input)>;

struct AdvParams {
  double norm_bound = 1.0;
  std::size_t budget = 200;
  /// Impairment kinds ("cfo", "iq_imbalance", "interference") used as
  /// structured search directions besides random ones. Inputs are read as
  /// interleaved I/Q pairs for these.
  std::vector<std::string> impairment_menu;
  std::string decision_path = "decision";
  std::string confidence_path = "confidence";
  std::size_t shrink_steps = 10;

  Json to_json() const;
};

struct AdvResult {
  bool found = false;
  std::vector<double> perturbation;
  double norm = 0;
  Json base_decision;
  Json adversarial_decision;
  std::size_t queries = 0;
  ExplorationTrace trace;
};

/// Random directions plus greedy magnitude shrink (bisection). A returned
/// perturbation has been re-queried and verified to flip the decision, and
/// its L2 norm is <= norm_bound. Queries <= budget; budget 0 => NOT_FOUND.
AdvResult adversarial_perturb(std::span<const double> base_input, const AdvParams& params, const VectorOracle& oracle,
                              std::uint64_t seed);

// ---- tabular Q-learning exploration ----

struct EnvStep {
  std::size_t next_state = 0;
  double reward = 0;
  Json response;
};

/// Discrete black-box environment. Each step() is one oracle query.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t start_state() const = 0;
  virtual EnvStep step(std::size_t state, std::size_t action) = 0;
  virtual Json describe() const = 0;
  virtual Json describe_state(std::size_t s) const { return s; }
};

struct QParams {
  double alpha = 0.5;
  double gamma = 0.9;
  std::size_t episodes = 300;
  std::size_t episode_len = 10;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Epsilon decays linearly over this fraction of episodes, then holds.
  double decay_fraction = 0.8;

  double epsilon(std::size_t episode) const;
  Json to_json() const;
  static QParams from_json(const Json& j);
};

struct RlResult {
  std::vector<std::vector<double>> q;
  std::vector<std::size_t> greedy_policy;
  /// Greedy rollout from the start state after training.
  std::vector<Json> worst_trajectory;
  /// Highest reward seen on the rollout and over all steps; with reward =
  /// -qos these are the worst QoS cases the search reached.
  double max_rollout_reward = 0;
  double max_reward = 0;
  std::size_t max_reward_state = 0;
  ExplorationTrace trace;
};

/// Lowest index wins on ties.
std::size_t argmax(std::span<const double> v);

/// Epsilon-greedy tabular Q-learning, then one greedy rollout of
/// episode_len steps. Throws ConfigError for empty spaces or episodes == 0.
RlResult rl_explore(Environment& env, const QParams& q, std::uint64_t seed);

/// Two-state chain: in state 0 action 0 pays 1 and stays, action 1 pays 0
/// and moves to state 1; in state 1 action 0 pays 0 and returns, action 1
/// pays 2 and stays.
class ChainEnv final : public Environment {
 public:
  std::size_t num_states() const override { return 2; }
  std::size_t num_actions() const override { return 2; }
  std::size_t start_state() const override { return 0; }
  EnvStep step(std::size_t s, std::size_t a) override;
  Json describe() const override;
};

/// Demand-pattern exploration against a scheduler. State = per-UE demand in
/// [1, max_demand]; actions: 0 stay, then (increment, decrement) per UE,
/// clamped. Reward = -qos_score of the scheduler for the next state.
class SchedulerDemandEnv final : public Environment {
 public:
  struct Options {
    std::size_t ues = 2;
    std::int64_t max_demand = 4;
    std::int64_t capacity = 4;
    std::vector<double> priorities;  // default all 1
    std::int64_t tti_count = 1;
    std::vector<std::int64_t> start;  // default all 1
  };
  /// `scheduler` receives a scheduler request document and returns the response.
  SchedulerDemandEnv(Options opt, std::function<Json(const Json&)> scheduler);

  std::size_t num_states() const override;
  std::size_t num_actions() const override { return 1 + 2 * opt_.ues; }
  std::size_t start_state() const override;
  EnvStep step(std::size_t s, std::size_t a) override;
  Json describe() const override;
  Json describe_state(std::size_t s) const override;

  std::vector<std::int64_t> demands(std::size_t s) const;
  std::size_t state_of(std::span<const std::int64_t> demands) const;
  std::size_t transition(std::size_t s, std::size_t a) const;
  Json request_for(std::size_t s) const;

 private:
  Options opt_;
  std::function<Json(const Json&)> scheduler_;
};

// ---- sessions driven by run_ai_session ----

/// SUT access for a session: (op, body) -> response body.
using SutCall = std::function<Json(const std::string& op, const Json& body)>;

/// Runs the method named by ai["method"] against the SUT. Throws ConfigError
/// for bad parameters and OracleFailure if the SUT fails mid-session.
ExplorationTrace run_session(const Json& ai, std::uint64_t seed, const SutCall& sut);

/// Compact, method-specific summary for reports.
Json session_summary(const ExplorationTrace& trace);

}  // namespace ait::aicore
