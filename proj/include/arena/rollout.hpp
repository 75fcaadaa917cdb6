#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "arena/taskgen.hpp"

// Closed-loop episodes: a session wraps a task plus a fresh database copy,
// policies pick from deterministically enumerated candidate actions, and
// trajectories capture everything needed to re-score the policy's choices.

namespace arena {

// ---------------------------------------------------------------------------
// Session dynamics

struct Observation {
  std::string kind;  // "task" | "tool_result" | "tool_error" | "termination"
  Value payload;
  bool error = false;

  Value to_value() const;
  static Observation from_value(const Value& v);
};

struct Action {
  enum class Kind { ToolCall, Respond };
  Kind kind = Kind::Respond;
  std::string tool;  // ToolCall
  ValueObject args;  // ToolCall
  Value answer;      // Respond
  // Per-argument grounding source: "prior_output" | "database" | "constant".
  std::map<std::string, std::string> arg_sources;

  Value to_value() const;
  static Action from_value(const Value& v);
};

struct SessionState {
  const EnvironmentBundle* env = nullptr;
  const TaskRecord* task = nullptr;
  Database db;  // live copy, mutated by committed tool calls
  std::vector<Observation> dialogue;
  std::vector<std::pair<std::string, Value>> tool_results;  // successful calls
  std::vector<WriteOp> write_log;
  int steps_taken = 0;  // tool calls attempted
  bool last_error = false;
  bool terminated = false;
  Value final_answer;
};

// Fresh session: copies env.db and seeds the dialogue with the task
// description as the opening observation.
SessionState reset_session(const TaskRecord& task, const EnvironmentBundle& env);

// Applies one action. Tool calls evaluate against the live database; an
// evaluation error rolls the database back, appends an error observation, and
// the episode continues. Respond terminates with the database untouched.
Observation step_session(SessionState& s, const Action& a);

// ---------------------------------------------------------------------------
// Candidate actions and features

struct CandidateAction {
  Action action;

  Value to_value() const;
  static CandidateAction from_value(const Value& v);
};

// Deterministic enumeration: for every tool, up to max_bindings_per_tool
// argument bindings drawn from prior outputs first and database values in
// document order, plus a final respond carrying the latest successful tool
// result (null before any). A tool with an ungroundable required parameter is
// skipped. Pure function of the session state.
std::vector<CandidateAction> enumerate_candidates(const SessionState& s,
                                                  int max_bindings_per_tool = 4);

// Feature layout (dimension kFeatureDim):
//   [0, 64)  tool-name hash (16 buckets) x step bucket (4) one-hot
//   [64, 68) respond flag x step bucket one-hot
//   [68, 71) argument-grounding counts: prior_output, database, constant
//   [71]     last observation was an error
//   [72]     bias
inline constexpr int kFeatureDim = 73;
inline constexpr int kToolHashBuckets = 16;
inline constexpr int kStepBuckets = 4;

int step_bucket(int steps_taken);
std::vector<double> featurize_candidate(const SessionState& s, const CandidateAction& c);
std::vector<std::vector<double>> featurize_candidates(const SessionState& s,
                                                      const std::vector<CandidateAction>& cs);

// ---------------------------------------------------------------------------
// Policies

struct PolicyParams {
  std::vector<double> theta;  // size kFeatureDim (or features' dim)
  double temperature = 1.0;

  Value to_value() const;
  static PolicyParams from_value(const Value& v);
};

PolicyParams zero_params(int dim = kFeatureDim, double temperature = 1.0);

// softmax(theta . phi / T) over the candidate features.
std::vector<double> softmax_policy_probs(const PolicyParams& p,
                                         const std::vector<std::vector<double>>& feats);
// Log-probability of `chosen` and the exact gradient of it w.r.t. theta.
std::pair<double, std::vector<double>> softmax_policy_logprob_grad(
    const PolicyParams& p, const std::vector<std::vector<double>>& feats, int chosen);

struct ActResult {
  Action action;
  double log_prob = 0.0;
  std::vector<std::vector<double>> features;  // all candidates (empty: scripted)
  int chosen = -1;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual ActResult act(const SessionState& s, Rng& rng) = 0;
};

class RandomPolicy : public Policy {
 public:
  ActResult act(const SessionState& s, Rng& rng) override;
};

class SoftmaxPolicy : public Policy {
 public:
  explicit SoftmaxPolicy(PolicyParams params) : params_(std::move(params)) {}
  ActResult act(const SessionState& s, Rng& rng) override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
};

// Scripted reference solver. Graph tasks: replays the grounded chain step by
// step and responds with the last successful result. Programmatic tasks:
// replays the mutation calls recorded in template_args (if any), then responds
// with the stored ground truth. With probability error_rate an action is
// corrupted (one argument, or the response value).
class BaselinePolicy : public Policy {
 public:
  explicit BaselinePolicy(double error_rate = 0.0) : error_rate_(error_rate) {}
  ActResult act(const SessionState& s, Rng& rng) override;

 private:
  double error_rate_;
};

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryStep {
  Observation observation;  // result of applying `action`
  Action action;
  double log_prob = 0.0;
  std::vector<std::vector<double>> features;  // candidate features at choice time
  int chosen = -1;
  int n_candidates = 0;  // |features| at choice time; survives serialization

  Value to_value() const;
  static TrajectoryStep from_value(const Value& v);
};

struct Trajectory {
  std::string task_id;
  std::vector<TrajectoryStep> steps;
  Value final_answer;
  Snapshot final_db;
  std::string terminated;  // "responded" | "step_budget" | "error_abort"

  Value to_value() const;  // summary form: features elided, db as digest + data
  static Trajectory from_value(const Value& v);
};

// Deterministic episode under a seeded rng; forces a terminal respond when the
// tool-call budget runs out (terminated = "step_budget").
Trajectory run_episode(Policy& policy, const TaskRecord& task, const EnvironmentBundle& env,
                       int budget, std::uint64_t seed);

struct RolloutGroup {
  std::string task_id;
  std::vector<Trajectory> members;
  std::vector<double> rewards;
};

// G independent episodes from identical resets under split seeds
// derive_seed(seed, "member", i); rewards scored from each member's answer
// and final database.
RolloutGroup run_group(Policy& policy, const TaskRecord& task, const EnvironmentBundle& env,
                       int group_size, int budget, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Consistency filtering

// One scripted-solver episode; true iff the scored reward is 1.
bool baseline_attempt(const TaskRecord& task, const EnvironmentBundle& env, double error_rate,
                      std::uint64_t seed, int budget = 32);

struct ConsistencyDecision {
  bool keep = false;
  std::vector<bool> passes;  // one per run, seeds derive_seed(seed, "run", i)
};

ConsistencyDecision consistency_filter(const TaskRecord& task, const EnvironmentBundle& env,
                                       double error_rate, std::uint64_t seed, int runs = 5,
                                       int min_pass = 2, int budget = 32);

}  // namespace arena
