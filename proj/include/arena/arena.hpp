#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "arena/reward.hpp"

// The self-evolution loop: a stratified evaluation arena drawn from the
// environment taxonomy, fresh per-round evaluation suites, seeded policy
// evaluation, rule-based failure diagnosis, targeted expansion of weak
// environments, and continued training round over round.

namespace arena {

using EnvMap = std::map<std::string, EnvironmentBundle>;

// ---------------------------------------------------------------------------
// Arena construction

struct ArenaSet {
  std::vector<std::string> members;  // all selected env ids, category order
  // first-tier label -> selected env ids for that category
  std::map<std::string, std::vector<std::string>> stratification;

  Value to_value() const;
  static ArenaSet from_value(const Value& v);
};

// Uniform sampling without replacement of min(k, category size) environments
// from every first-tier category. Throws ValueError on an empty taxonomy or
// k < 1.
ArenaSet build_arena(const Taxonomy& taxonomy, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Per-round evaluation suites

struct EvalRoundSuite {
  std::vector<TaskRecord> tasks;
  std::vector<std::string> flagged_envs;  // dropped: synthesis failed entirely

  Value to_value() const;
  static EvalRoundSuite from_value(const Value& v);
};

// Fresh tasks for every arena member under round-salted seeds; task ids carry
// the round prefix "r<round>-" so suites from distinct rounds never collide.
// An environment that cannot synthesize its quota is dropped and flagged.
EvalRoundSuite synthesize_eval_round(const ArenaSet& arena, const EnvMap& envs, int round,
                                     int per_env_graph, int per_env_prog,
                                     const DifficultyKnobs& knobs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
  std::string task_id;
  std::string env_id;
  double reward = 0.0;
  RewardOutcome outcome;
  std::string terminated;
  int n_steps = 0;

  Value to_value() const;
  static EvalRow from_value(const Value& v);
};

struct EvalResults {
  std::vector<EvalRow> rows;
  std::vector<Trajectory> traces;  // parallel to rows; in-memory only
  double pass_rate = 0.0;
  std::map<std::string, std::pair<int, int>> per_env;  // env -> {passes, tasks}

  Value to_value() const;  // rows and aggregates; traces are not embedded
  static EvalResults from_value(const Value& v);
};

// One seeded episode per task (seed derived from the task id), scored by the
// task's own reward channel. Tasks whose environment is missing from `envs`
// are an error.
EvalResults evaluate_policy(Policy& policy, const std::vector<TaskRecord>& suite,
                            const EnvMap& envs, int budget, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Diagnosis

enum class FailureMode {
  BudgetExhaustion,
  WrongTool,
  PrematureRespond,
  VerifierStateMismatch,
  BadGrounding,
};

const char* failure_mode_name(FailureMode m);

// Deterministic classification of one failed trace, first match wins:
//   1. budget_exhaustion        the episode hit the step budget
//   2. wrong_tool               a call outside the task's own tool set
//                               (chain tools for walk tasks, the template's
//                               mutation tool for programmatic ones)
//   3. premature_respond        a mutating task answered without one
//                               successful write-bearing call
//   4. verifier_state_mismatch  programmatic verifier failed a "state:"
//                               assert (answer asserts precede state asserts)
//   5. bad_grounding            residual: right tools, wrong arguments or
//                               wrong final answer
FailureMode classify_failure(const TaskRecord& task, const Trajectory& trace,
                             const EnvironmentBundle& env, const RewardOutcome& outcome);

struct EnvDiagnosis {
  std::string env_id;
  int tasks = 0;
  int passes = 0;
  double pass_rate = 1.0;
  std::map<std::string, int> failure_histogram;  // mode name -> count

  Value to_value() const;
  static EnvDiagnosis from_value(const Value& v);
};

struct GuidelineRecord {
  std::string env_id;
  std::vector<std::string> dominant_modes;  // max-count modes, name order
  // Deltas applied to the base knobs for targeted synthesis (zero-initialized,
  // unlike the absolute defaults in DifficultyKnobs).
  int walk_len_delta = 0;
  int obfuscation_delta = 0;
  std::vector<std::string> boost_tools;  // implicated tools, sorted unique
  bool complexify = false;

  Value to_value() const;
  static GuidelineRecord from_value(const Value& v);
};

struct DiagnosisReport {
  std::vector<EnvDiagnosis> env_stats;  // sorted by env_id
  double median_pass_rate = 1.0;
  // Strictly below the median, ascending pass rate, ties on rate broken by
  // lexicographic env id; envs exactly at the median are excluded.
  std::vector<std::string> weak_set;
  std::map<std::string, GuidelineRecord> guidelines;  // one per weak env

  Value to_value() const;
  static DiagnosisReport from_value(const Value& v);
};

// Statistical replacement for an LLM diagnosis agent: per-env pass rates,
// failure-mode histograms over the failed traces, the weak set, and one
// guideline per weak environment. Throws ValueError on empty results.
DiagnosisReport diagnose(const EvalResults& results, const std::vector<TaskRecord>& suite,
                         const EnvMap& envs);

// ---------------------------------------------------------------------------
// Targeted expansion

struct TargetedExpansion {
  std::vector<TaskRecord> tasks;              // weak envs only, prefix "t<round>-"
  std::vector<std::string> complexified;      // envs grown this call
  std::vector<std::string> flagged_envs;      // weak envs whose synthesis failed

  Value to_value() const;
  static TargetedExpansion from_value(const Value& v);
};

// For every weak environment: complexify the database when the guideline says
// so (refreshing tool unit cases), apply the guideline's knob deltas (clamped
// to walk length >= 1 and obfuscation in [0, 2]), and synthesize a targeted
// suite with the implicated tools' walk weights boosted by `boost_factor`.
// Mutates `envs` in place for complexified members.
TargetedExpansion targeted_expand(const DiagnosisReport& report, EnvMap& envs,
                                  const DifficultyKnobs& base_knobs, int per_env_graph,
                                  int per_env_prog, int round, const ComplexifyKnobs& growth,
                                  double boost_factor, std::uint64_t seed);

// ---------------------------------------------------------------------------
// The self-evolution loop

struct ArenaConfig {
  int k = 5;                   // environments per first-tier category
  int per_env_graph = 2;       // eval suite quota per env per round
  int per_env_prog = 1;
  int targeted_graph = 3;      // targeted suite quota per weak env
  int targeted_prog = 2;
  int budget = 16;             // tool-call budget per episode
  double boost_factor = 2.0;   // walk-weight multiplier for implicated tools
  bool hold_out_arena = true;  // keep arena members out of base training pools
  DifficultyKnobs knobs;
  ComplexifyKnobs growth;
  GrpoConfig train;
  std::string out_dir;  // when set, arena_round_<r>.json is written per round

  Value to_value() const;
  static ArenaConfig from_value(const Value& v);
};

struct ArenaRoundReport {
  int round = 0;
  std::string seed;  // decimal master seed for replay
  Value config;      // ArenaConfig echo: knobs and quotas that shaped the round
  std::vector<std::string> eval_task_ids;
  std::vector<std::string> flagged_envs;
  std::vector<EvalRow> eval_rows;
  std::map<std::string, std::pair<int, int>> pre_per_env;   // env -> {passes, tasks}
  std::map<std::string, std::pair<int, int>> post_per_env;  // same suite, after training
  double pre_pass_rate = 0.0;
  double post_pass_rate = 0.0;
  DiagnosisReport diagnosis;
  std::vector<std::string> targeted_task_ids;
  std::vector<std::string> complexified;
  Value train_summary;  // TrainResult::summary(), null when no training ran

  Value to_value() const;
  static ArenaRoundReport from_value(const Value& v);
};

struct SelfEvolutionResult {
  PolicyParams final_params;
  std::vector<ArenaRoundReport> rounds;
};

// Runs `rounds` evaluate -> diagnose -> expand -> retrain cycles starting
// from `init`. The arena is drawn once from the taxonomy; arena members'
// databases may grow across rounds through targeted complexification. Each
// round trains only on its targeted suite (no weak envs means no training
// that round). When cfg.out_dir is set every round's report is persisted as
// arena_round_<round>.json.
SelfEvolutionResult run_self_evolution(const PolicyParams& init,
                                       const std::vector<EnvironmentBundle>& ecosystem,
                                       const Taxonomy& taxonomy, const ArenaConfig& cfg,
                                       int rounds, std::uint64_t seed);

}  // namespace arena
