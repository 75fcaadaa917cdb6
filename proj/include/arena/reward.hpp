#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arena/rollout.hpp"

// Executable rewards (rubric evaluation and verifier programs) and group
// relative policy optimization on top of them.

namespace arena {

// ---------------------------------------------------------------------------
// Rewards

struct RewardOutcome {
  double reward = 0.0;  // binary 0/1
  std::vector<bool> criterion_results;  // rubric path
  bool verifier_pass = false;           // verifier path
  std::string detail;

  Value to_value() const;
  static RewardOutcome from_value(const Value& v);
};

// Scores an answer against a rubric: reward 1 iff the mean criterion
// indicator reaches rubric.threshold. An unresolvable path fails its
// criterion; it is never an error.
RewardOutcome evaluate_rubric(const Rubric& rubric, const Value& answer);

bool numeric_close(double a, double b, double rel_tol = 1e-6, double abs_tol = 1e-9);

// Runs a verifier program against (answer, final database). Reward 1 iff
// every assert passes; any runtime error (including assert failure) yields
// reward 0 with the diagnostic in detail.
RewardOutcome execute_verifier(const std::string& verifier_source, const Value& answer,
                               const Database& final_db);

// Dispatches on task.kind: rubric for graph tasks, verifier for programmatic.
RewardOutcome score_trajectory(const TaskRecord& task, const Value& answer,
                               const Database& final_db);

// ---------------------------------------------------------------------------
// Group-relative advantages and the clipped surrogate

// (r - mean) / population std, broadcast per trajectory; all zeros when the
// group is degenerate (std == 0).
std::vector<double> compute_group_advantages(const std::vector<double>& rewards);

struct GrpoConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;
  double beta = 0.0;  // KL penalty vs the frozen reference policy
  int group_size = 8;
  double learning_rate = 0.05;
  int steps = 100;
  int batch_tasks = 32;
  int budget = 32;

  Value to_value() const;
  static GrpoConfig from_value(const Value& v);
};

struct GrpoResult {
  double objective = 0.0;  // clipped surrogate minus beta * mean KL
  std::vector<double> grad;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

// Token-mean surrogate: each trajectory contributes the mean over its steps
// of min(ratio * A, clip(ratio, 1-eps_low, 1+eps_high) * A), averaged over
// trajectories, minus beta times the exact categorical KL(pi_theta || pi_ref)
// averaged over every visited decision state. Ratios use the stored
// behavior-policy log-probs. advantages[i] pairs with trajectories[i].
GrpoResult grpo_loss_and_grad(const std::vector<const Trajectory*>& trajectories,
                              const std::vector<double>& advantages, const PolicyParams& params,
                              const PolicyParams& ref_params, const GrpoConfig& cfg);

// Mean Shannon entropy (nats) of the policy over the visited states.
double policy_entropy(const PolicyParams& params,
                      const std::vector<const Trajectory*>& trajectories);

// ---------------------------------------------------------------------------
// Training loop

struct TrainMetricsRow {
  int step = 0;
  double mean_reward = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainMetricsRow> metrics;
  double final_mean_reward = 0.0;

  std::string metrics_csv() const;  // "step,mean_reward,entropy,kl,clip_fraction"
  Value summary() const;
};

struct TrainTask {
  const TaskRecord* task = nullptr;
  const EnvironmentBundle* env = nullptr;
};

// On-policy loop: each step samples batch_tasks tasks, rolls a group per task
// under the current parameters, scores rewards, and takes one ascent step on
// the surrogate. The behavior policy refreshes every step; the KL reference
// stays frozen at the initial parameters. Throws ValueError on a non-finite
// gradient.
TrainResult train(const std::vector<TrainTask>& tasks, const PolicyParams& init,
                  const GrpoConfig& cfg, std::uint64_t seed);

}  // namespace arena
