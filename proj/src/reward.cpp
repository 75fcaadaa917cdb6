#include "arena/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "arena/dsl.hpp"
#include "arena/rng.hpp"

namespace arena {

namespace {

const Value& need(const ValueObject& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end()) throw ValueError("missing field '" + key + "'");
  return it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// Rewards

Value RewardOutcome::to_value() const {
  ValueObject o;
  o["reward"] = Value(reward);
  ValueList cr;
  for (bool b : criterion_results) cr.emplace_back(b);
  o["criterion_results"] = Value(std::move(cr));
  o["verifier_pass"] = Value(verifier_pass);
  o["detail"] = Value(detail);
  return Value(std::move(o));
}

RewardOutcome RewardOutcome::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  RewardOutcome r;
  r.reward = need(o, "reward").as_number();
  for (const Value& b : need(o, "criterion_results").as_list())
    r.criterion_results.push_back(b.as_bool());
  r.verifier_pass = need(o, "verifier_pass").as_bool();
  r.detail = need(o, "detail").as_string();
  return r;
}

bool numeric_close(double a, double b, double rel_tol, double abs_tol) {
  return std::abs(a - b) <= abs_tol + rel_tol * std::abs(b);
}

RewardOutcome evaluate_rubric(const Rubric& rubric, const Value& answer) {
  RewardOutcome out;
  if (rubric.criteria.empty()) {
    out.detail = "empty rubric";
    return out;
  }
  int passed = 0;
  for (const RubricItem& item : rubric.criteria) {
    const Value* v = resolve_value_path(answer, item.path);
    bool ok = false;
    if (v != nullptr) {
      switch (item.check) {
        case RubricItem::Check::FieldPresent: ok = true; break;
        case RubricItem::Check::SchemaMatch: ok = v->kind() == item.kind; break;
        case RubricItem::Check::ValueEquals: ok = *v == item.expect; break;
        case RubricItem::Check::NumericClose:
          ok = v->is_number() && item.expect.is_number() &&
               numeric_close(v->as_number(), item.expect.as_number(), item.rel_tol, item.abs_tol);
          break;
      }
    }
    out.criterion_results.push_back(ok);
    if (ok) ++passed;
  }
  const double mean = static_cast<double>(passed) / static_cast<double>(rubric.criteria.size());
  out.reward = mean >= rubric.threshold ? 1.0 : 0.0;
  out.detail = std::to_string(passed) + "/" + std::to_string(rubric.criteria.size()) +
               " criteria passed";
  return out;
}

RewardOutcome execute_verifier(const std::string& verifier_source, const Value& answer,
                               const Database& final_db) {
  RewardOutcome out;
  ProgramPtr prog;
  try {
    prog = parse_program(verifier_source);
    if (!prog->is_verifier) {
      out.detail = "program is not a verifier";
      return out;
    }
    check_program(*prog, &final_db);
  } catch (const Error& e) {
    out.detail = std::string("invalid verifier: ") + e.what();
    return out;
  }
  if (prog->sig.params.size() != 1) {
    out.detail = "verifier must take exactly one parameter";
    return out;
  }
  ValueObject args;
  args[prog->sig.params[0].name] = answer;
  EvalOutcome o = evaluate_program(*prog, final_db, args);
  if (o.ok) {
    out.verifier_pass = true;
    out.reward = 1.0;
    out.detail = "all asserts passed";
  } else {
    out.detail = o.error.code + ": " + o.error.message;
  }
  return out;
}

RewardOutcome score_trajectory(const TaskRecord& task, const Value& answer,
                               const Database& final_db) {
  if (task.kind == "graph") return evaluate_rubric(task.rubric, answer);
  if (task.kind == "programmatic") return execute_verifier(task.verifier_source, answer, final_db);
  throw ValueError("unknown task kind '" + task.kind + "'");
}

// ---------------------------------------------------------------------------
// Advantages

std::vector<double> compute_group_advantages(const std::vector<double>& rewards) {
  if (rewards.empty()) throw ValueError("cannot compute advantages of an empty group");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  std::vector<double> adv(rewards.size(), 0.0);
  if (var == 0.0) return adv;  // degenerate group: all advantages zero
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

// ---------------------------------------------------------------------------
// GRPO surrogate

Value GrpoConfig::to_value() const {
  ValueObject o;
  o["eps_low"] = Value(eps_low);
  o["eps_high"] = Value(eps_high);
  o["beta"] = Value(beta);
  o["group_size"] = Value(static_cast<std::int64_t>(group_size));
  o["learning_rate"] = Value(learning_rate);
  o["steps"] = Value(static_cast<std::int64_t>(steps));
  o["batch_tasks"] = Value(static_cast<std::int64_t>(batch_tasks));
  o["budget"] = Value(static_cast<std::int64_t>(budget));
  return Value(std::move(o));
}

GrpoConfig GrpoConfig::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  GrpoConfig c;
  c.eps_low = need(o, "eps_low").as_number();
  c.eps_high = need(o, "eps_high").as_number();
  c.beta = need(o, "beta").as_number();
  c.group_size = static_cast<int>(need(o, "group_size").as_int());
  c.learning_rate = need(o, "learning_rate").as_number();
  c.steps = static_cast<int>(need(o, "steps").as_int());
  c.batch_tasks = static_cast<int>(need(o, "batch_tasks").as_int());
  c.budget = static_cast<int>(need(o, "budget").as_int());
  return c;
}

GrpoResult grpo_loss_and_grad(const std::vector<const Trajectory*>& trajectories,
                              const std::vector<double>& advantages, const PolicyParams& params,
                              const PolicyParams& ref_params, const GrpoConfig& cfg) {
  if (trajectories.size() != advantages.size())
    throw ValueError("trajectory/advantage count mismatch");
  if (cfg.eps_low < 0.0 || cfg.eps_high < 0.0 || cfg.beta < 0.0)
    throw ValueError("eps_low, eps_high and beta must be non-negative");
  const std::size_t d = params.theta.size();
  GrpoResult res;
  res.grad.assign(d, 0.0);
  std::vector<double> surr_grad(d, 0.0), kl_grad(d, 0.0);
  double surr_sum = 0.0, kl_sum = 0.0;
  std::size_t n_traj = 0, n_states = 0, n_steps = 0, n_clipped = 0;
  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const Trajectory& traj = *trajectories[ti];
    const double A = advantages[ti];
    std::size_t T = 0;
    for (const TrajectoryStep& st : traj.steps)
      if (st.chosen >= 0 && !st.features.empty()) ++T;
    if (T == 0) continue;  // only forced actions: nothing differentiable
    double traj_sum = 0.0;
    std::vector<double> traj_grad(d, 0.0);
    for (const TrajectoryStep& st : traj.steps) {
      if (st.chosen < 0 || st.features.empty()) continue;
      auto [logp, glogp] = softmax_policy_logprob_grad(params, st.features, st.chosen);
      const double ratio = std::exp(logp - st.log_prob);
      const double lo = 1.0 - cfg.eps_low, hi = 1.0 + cfg.eps_high;
      const double clipped = std::min(std::max(ratio, lo), hi);
      const double a = ratio * A;
      const double b = clipped * A;
      ++n_steps;
      if (a <= b) {
        traj_sum += a;
        for (std::size_t i = 0; i < d; ++i) traj_grad[i] += A * ratio * glogp[i];
      } else {
        // the clipped branch is active and the clamp saturates, so the
        // term is constant in theta
        traj_sum += b;
        ++n_clipped;
      }
      // Exact categorical KL(pi_theta || pi_ref) at this decision state.
      std::vector<double> p_new = softmax_policy_probs(params, st.features);
      std::vector<double> p_ref = softmax_policy_probs(ref_params, st.features);
      std::vector<double> mean_feat(d, 0.0);
      for (std::size_t c = 0; c < st.features.size(); ++c)
        for (std::size_t i = 0; i < d; ++i) mean_feat[i] += p_new[c] * st.features[c][i];
      double kl = 0.0;
      for (std::size_t c = 0; c < st.features.size(); ++c) {
        const double lr = std::log(p_new[c]) - std::log(p_ref[c]);
        kl += p_new[c] * lr;
        const double w = p_new[c] * lr / params.temperature;
        for (std::size_t i = 0; i < d; ++i) kl_grad[i] += w * (st.features[c][i] - mean_feat[i]);
      }
      kl_sum += kl;
      ++n_states;
    }
    surr_sum += traj_sum / static_cast<double>(T);
    for (std::size_t i = 0; i < d; ++i) surr_grad[i] += traj_grad[i] / static_cast<double>(T);
    ++n_traj;
  }
  if (n_traj == 0) throw ValueError("no scorable trajectories");
  res.objective = surr_sum / static_cast<double>(n_traj);
  for (std::size_t i = 0; i < d; ++i) res.grad[i] = surr_grad[i] / static_cast<double>(n_traj);
  if (n_states > 0) {
    res.mean_kl = kl_sum / static_cast<double>(n_states);
    if (cfg.beta > 0.0) {
      res.objective -= cfg.beta * res.mean_kl;
      for (std::size_t i = 0; i < d; ++i)
        res.grad[i] -= cfg.beta * kl_grad[i] / static_cast<double>(n_states);
    }
  }
  res.clip_fraction =
      n_steps == 0 ? 0.0 : static_cast<double>(n_clipped) / static_cast<double>(n_steps);
  return res;
}

double policy_entropy(const PolicyParams& params,
                      const std::vector<const Trajectory*>& trajectories) {
  double total = 0.0;
  std::size_t n = 0;
  for (const Trajectory* t : trajectories) {
    for (const TrajectoryStep& st : t->steps) {
      if (st.features.empty()) continue;
      std::vector<double> p = softmax_policy_probs(params, st.features);
      double h = 0.0;
      for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
      total += h;
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return std::string(buf);
}

}  // namespace

std::string TrainResult::metrics_csv() const {
  std::string out = "step,mean_reward,entropy,kl,clip_fraction\n";
  for (const TrainMetricsRow& r : metrics) {
    out += std::to_string(r.step) + "," + fmt(r.mean_reward) + "," + fmt(r.entropy) + "," +
           fmt(r.kl) + "," + fmt(r.clip_fraction) + "\n";
  }
  return out;
}

Value TrainResult::summary() const {
  ValueObject o;
  o["steps"] = Value(static_cast<std::int64_t>(metrics.size()));
  o["final_mean_reward"] = Value(final_mean_reward);
  o["dim"] = Value(static_cast<std::int64_t>(params.theta.size()));
  o["temperature"] = Value(params.temperature);
  if (!metrics.empty()) {
    o["first_mean_reward"] = Value(metrics.front().mean_reward);
    o["final_entropy"] = Value(metrics.back().entropy);
    o["final_kl"] = Value(metrics.back().kl);
  }
  return Value(std::move(o));
}

TrainResult train(const std::vector<TrainTask>& tasks, const PolicyParams& init,
                  const GrpoConfig& cfg, std::uint64_t seed) {
  if (tasks.empty()) throw ValueError("train needs at least one task");
  if (cfg.steps < 0 || cfg.batch_tasks < 1 || cfg.group_size < 2 || cfg.budget < 1)
    throw ValueError("invalid training configuration");
  if (cfg.learning_rate <= 0.0) throw ValueError("learning rate must be positive");
  for (const TrainTask& t : tasks)
    if (t.task == nullptr || t.env == nullptr) throw ValueError("null task or environment");
  TrainResult res;
  res.params = init;
  const PolicyParams ref = init;  // KL anchor frozen at initialization
  for (int step = 0; step < cfg.steps; ++step) {
    const std::uint64_t step_seed = derive_seed(seed, "train", static_cast<std::uint64_t>(step));
    Rng rng(derive_seed(step_seed, "batch"));
    SoftmaxPolicy behavior(res.params);  // params_old, refreshed every step
    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<std::size_t>(cfg.batch_tasks));
    std::vector<std::vector<double>> advs;
    double reward_sum = 0.0;
    std::size_t reward_n = 0;
    for (int b = 0; b < cfg.batch_tasks; ++b) {
      const TrainTask& tt =
          tasks[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(tasks.size())))];
      RolloutGroup g = run_group(behavior, *tt.task, *tt.env, cfg.group_size, cfg.budget,
                                 derive_seed(step_seed, "grp", static_cast<std::uint64_t>(b)));
      advs.push_back(compute_group_advantages(g.rewards));
      for (double r : g.rewards) {
        reward_sum += r;
        ++reward_n;
      }
      groups.push_back(std::move(g));
    }
    std::vector<const Trajectory*> flat;
    std::vector<double> flat_adv;
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (std::size_t mi = 0; mi < groups[gi].members.size(); ++mi) {
        flat.push_back(&groups[gi].members[mi]);
        flat_adv.push_back(advs[gi][mi]);
      }
    GrpoResult gr = grpo_loss_and_grad(flat, flat_adv, res.params, ref, cfg);
    for (double g : gr.grad)
      if (!std::isfinite(g))
        throw ValueError("non-finite gradient at training step " + std::to_string(step));
    for (std::size_t i = 0; i < res.params.theta.size(); ++i)
      res.params.theta[i] += cfg.learning_rate * gr.grad[i];
    TrainMetricsRow row;
    row.step = step;
    row.mean_reward = reward_n == 0 ? 0.0 : reward_sum / static_cast<double>(reward_n);
    row.entropy = policy_entropy(res.params, flat);
    row.kl = gr.mean_kl;
    row.clip_fraction = gr.clip_fraction;
    res.metrics.push_back(row);
    res.final_mean_reward = row.mean_reward;
  }
  return res;
}

}  // namespace arena
