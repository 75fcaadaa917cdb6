#include "arena/arena.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "arena/rng.hpp"

namespace arena {

namespace {

const Value& need(const ValueObject& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end()) throw ValueError("missing field '" + key + "'");
  return it->second;
}

Value string_list_value(const std::vector<std::string>& xs) {
  ValueList l;
  l.reserve(xs.size());
  for (const std::string& x : xs) l.emplace_back(x);
  return Value(std::move(l));
}

std::vector<std::string> string_list_from(const Value& v) {
  std::vector<std::string> out;
  for (const Value& x : v.as_list()) out.push_back(x.as_string());
  return out;
}

Value pass_count_map_value(const std::map<std::string, std::pair<int, int>>& m) {
  ValueObject o;
  for (const auto& [env_id, pt] : m) {
    ValueObject e;
    e["passes"] = Value(static_cast<std::int64_t>(pt.first));
    e["tasks"] = Value(static_cast<std::int64_t>(pt.second));
    o[env_id] = Value(std::move(e));
  }
  return Value(std::move(o));
}

std::map<std::string, std::pair<int, int>> pass_count_map_from(const Value& v) {
  std::map<std::string, std::pair<int, int>> out;
  for (const auto& [env_id, e] : v.as_object()) {
    const ValueObject& o = e.as_object();
    out[env_id] = {static_cast<int>(need(o, "passes").as_int()),
                   static_cast<int>(need(o, "tasks").as_int())};
  }
  return out;
}

// The tools a task's own provenance legitimizes: the chain's tools for walk
// tasks, the recorded mutation tool for programmatic tasks that have one,
// nothing for read-only programmatic tasks.
std::set<std::string> task_tool_set(const TaskRecord& task) {
  std::set<std::string> r;
  if (task.kind == "graph") {
    for (const ChainStep& st : task.chain.steps) r.insert(st.tool);
  } else if (task.template_args.is_object()) {
    const ValueObject& ta = task.template_args.as_object();
    auto it = ta.find("tool");
    if (it != ta.end() && it->second.is_string()) r.insert(it->second.as_string());
  }
  return r;
}

bool made_successful_write(const Trajectory& trace, const EnvironmentBundle& env) {
  for (const TrajectoryStep& ts : trace.steps) {
    if (ts.action.kind != Action::Kind::ToolCall) continue;
    if (ts.observation.kind != "tool_result") continue;
    const CheckedTool* t = env.find_tool(ts.action.tool);
    if (t != nullptr && !t->sig().writes.empty()) return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Arena construction

Value ArenaSet::to_value() const {
  ValueObject o;
  o["members"] = string_list_value(members);
  ValueObject strat;
  for (const auto& [label, ids] : stratification) strat[label] = string_list_value(ids);
  o["stratification"] = Value(std::move(strat));
  return Value(std::move(o));
}

ArenaSet ArenaSet::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  ArenaSet a;
  a.members = string_list_from(need(o, "members"));
  for (const auto& [label, ids] : need(o, "stratification").as_object())
    a.stratification[label] = string_list_from(ids);
  return a;
}

ArenaSet build_arena(const Taxonomy& taxonomy, int k, std::uint64_t seed) {
  if (k < 1) throw ValueError("arena size per category must be at least 1");
  if (taxonomy.first_tier.empty()) throw ValueError("cannot build an arena from an empty taxonomy");
  ArenaSet out;
  for (const auto& [label, ids] : taxonomy.first_tier) {
    if (ids.empty()) continue;
    std::vector<std::string> pool = ids;
    std::sort(pool.begin(), pool.end());
    Rng rng(derive_seed(seed, label));
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(pool.size() - i)));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    std::sort(pool.begin(), pool.end());
    out.stratification[label] = pool;
    out.members.insert(out.members.end(), pool.begin(), pool.end());
  }
  if (out.members.empty()) throw ValueError("taxonomy holds no environments");
  return out;
}

// ---------------------------------------------------------------------------
// Per-round evaluation suites

Value EvalRoundSuite::to_value() const {
  ValueObject o;
  ValueList ts;
  ts.reserve(tasks.size());
  for (const TaskRecord& t : tasks) ts.push_back(t.to_value());
  o["tasks"] = Value(std::move(ts));
  o["flagged_envs"] = string_list_value(flagged_envs);
  return Value(std::move(o));
}

EvalRoundSuite EvalRoundSuite::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  EvalRoundSuite s;
  for (const Value& t : need(o, "tasks").as_list()) s.tasks.push_back(TaskRecord::from_value(t));
  s.flagged_envs = string_list_from(need(o, "flagged_envs"));
  return s;
}

EvalRoundSuite synthesize_eval_round(const ArenaSet& arena, const EnvMap& envs, int round,
                                     int per_env_graph, int per_env_prog,
                                     const DifficultyKnobs& knobs, std::uint64_t seed) {
  if (round < 0) throw ValueError("round must be non-negative");
  if (per_env_graph < 0 || per_env_prog < 0 || per_env_graph + per_env_prog < 1)
    throw ValueError("per-env task quota must be at least 1");
  EvalRoundSuite out;
  const std::string prefix = "r" + std::to_string(round) + "-";
  for (const std::string& env_id : arena.members) {
    auto it = envs.find(env_id);
    if (it == envs.end())
      throw NotFoundError("arena member '" + env_id + "' is missing from the environment set", env_id);
    const EnvironmentBundle& env = it->second;
    const ThemeTemplate& theme = builtin_theme(env.theme);
    try {
      std::vector<TaskRecord> ts =
          synthesize_tasks(env, theme, knobs, per_env_graph, per_env_prog,
                           derive_seed(seed, env_id, static_cast<std::uint64_t>(round)), prefix);
      for (TaskRecord& t : ts) out.tasks.push_back(std::move(t));
    } catch (const Error&) {
      out.flagged_envs.push_back(env_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

Value EvalRow::to_value() const {
  ValueObject o;
  o["task_id"] = Value(task_id);
  o["env_id"] = Value(env_id);
  o["reward"] = Value(reward);
  o["outcome"] = outcome.to_value();
  o["terminated"] = Value(terminated);
  o["n_steps"] = Value(static_cast<std::int64_t>(n_steps));
  return Value(std::move(o));
}

EvalRow EvalRow::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  EvalRow r;
  r.task_id = need(o, "task_id").as_string();
  r.env_id = need(o, "env_id").as_string();
  r.reward = need(o, "reward").as_number();
  r.outcome = RewardOutcome::from_value(need(o, "outcome"));
  r.terminated = need(o, "terminated").as_string();
  r.n_steps = static_cast<int>(need(o, "n_steps").as_int());
  return r;
}

Value EvalResults::to_value() const {
  ValueObject o;
  ValueList rs;
  rs.reserve(rows.size());
  for (const EvalRow& r : rows) rs.push_back(r.to_value());
  o["rows"] = Value(std::move(rs));
  o["pass_rate"] = Value(pass_rate);
  o["per_env"] = pass_count_map_value(per_env);
  return Value(std::move(o));
}

EvalResults EvalResults::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  EvalResults r;
  for (const Value& row : need(o, "rows").as_list()) r.rows.push_back(EvalRow::from_value(row));
  r.pass_rate = need(o, "pass_rate").as_number();
  r.per_env = pass_count_map_from(need(o, "per_env"));
  return r;
}

EvalResults evaluate_policy(Policy& policy, const std::vector<TaskRecord>& suite,
                            const EnvMap& envs, int budget, std::uint64_t seed) {
  if (budget < 0) throw ValueError("budget must be non-negative");
  EvalResults out;
  int passes = 0;
  for (const TaskRecord& task : suite) {
    auto it = envs.find(task.env_id);
    if (it == envs.end())
      throw NotFoundError("task '" + task.task_id + "' references unknown environment '" +
                              task.env_id + "'",
                          task.env_id);
    Trajectory traj = run_episode(policy, task, it->second, budget, derive_seed(seed, task.task_id));
    RewardOutcome oc = score_trajectory(task, traj.final_answer, traj.final_db.db);
    EvalRow row;
    row.task_id = task.task_id;
    row.env_id = task.env_id;
    row.reward = oc.reward;
    row.terminated = traj.terminated;
    row.n_steps = static_cast<int>(traj.steps.size());
    auto& pe = out.per_env[task.env_id];
    pe.second += 1;
    if (oc.reward == 1.0) {
      pe.first += 1;
      ++passes;
    }
    row.outcome = std::move(oc);
    out.rows.push_back(std::move(row));
    out.traces.push_back(std::move(traj));
  }
  out.pass_rate =
      suite.empty() ? 0.0 : static_cast<double>(passes) / static_cast<double>(suite.size());
  return out;
}

// ---------------------------------------------------------------------------
// Diagnosis

const char* failure_mode_name(FailureMode m) {
  switch (m) {
    case FailureMode::BudgetExhaustion: return "budget_exhaustion";
    case FailureMode::WrongTool: return "wrong_tool";
    case FailureMode::PrematureRespond: return "premature_respond";
    case FailureMode::VerifierStateMismatch: return "verifier_state_mismatch";
    case FailureMode::BadGrounding: return "bad_grounding";
  }
  return "bad_grounding";
}

FailureMode classify_failure(const TaskRecord& task, const Trajectory& trace,
                             const EnvironmentBundle& env, const RewardOutcome& outcome) {
  if (trace.terminated == "step_budget") return FailureMode::BudgetExhaustion;
  const std::set<std::string> reach = task_tool_set(task);
  for (const TrajectoryStep& ts : trace.steps)
    if (ts.action.kind == Action::Kind::ToolCall && reach.find(ts.action.tool) == reach.end())
      return FailureMode::WrongTool;
  if (task.mutating && !made_successful_write(trace, env)) return FailureMode::PrematureRespond;
  if (task.kind == "programmatic" && outcome.detail.find("state:") != std::string::npos)
    return FailureMode::VerifierStateMismatch;
  return FailureMode::BadGrounding;
}

Value EnvDiagnosis::to_value() const {
  ValueObject o;
  o["env_id"] = Value(env_id);
  o["tasks"] = Value(static_cast<std::int64_t>(tasks));
  o["passes"] = Value(static_cast<std::int64_t>(passes));
  o["pass_rate"] = Value(pass_rate);
  ValueObject h;
  for (const auto& [mode, count] : failure_histogram)
    h[mode] = Value(static_cast<std::int64_t>(count));
  o["failure_histogram"] = Value(std::move(h));
  return Value(std::move(o));
}

EnvDiagnosis EnvDiagnosis::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  EnvDiagnosis d;
  d.env_id = need(o, "env_id").as_string();
  d.tasks = static_cast<int>(need(o, "tasks").as_int());
  d.passes = static_cast<int>(need(o, "passes").as_int());
  d.pass_rate = need(o, "pass_rate").as_number();
  for (const auto& [mode, count] : need(o, "failure_histogram").as_object())
    d.failure_histogram[mode] = static_cast<int>(count.as_int());
  return d;
}

Value GuidelineRecord::to_value() const {
  ValueObject o;
  o["env_id"] = Value(env_id);
  o["dominant_modes"] = string_list_value(dominant_modes);
  o["walk_len_delta"] = Value(static_cast<std::int64_t>(walk_len_delta));
  o["obfuscation_delta"] = Value(static_cast<std::int64_t>(obfuscation_delta));
  o["boost_tools"] = string_list_value(boost_tools);
  o["complexify"] = Value(complexify);
  return Value(std::move(o));
}

GuidelineRecord GuidelineRecord::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  GuidelineRecord g;
  g.env_id = need(o, "env_id").as_string();
  g.dominant_modes = string_list_from(need(o, "dominant_modes"));
  g.walk_len_delta = static_cast<int>(need(o, "walk_len_delta").as_int());
  g.obfuscation_delta = static_cast<int>(need(o, "obfuscation_delta").as_int());
  g.boost_tools = string_list_from(need(o, "boost_tools"));
  g.complexify = need(o, "complexify").as_bool();
  return g;
}

Value DiagnosisReport::to_value() const {
  ValueObject o;
  ValueList es;
  es.reserve(env_stats.size());
  for (const EnvDiagnosis& d : env_stats) es.push_back(d.to_value());
  o["env_stats"] = Value(std::move(es));
  o["median_pass_rate"] = Value(median_pass_rate);
  o["weak_set"] = string_list_value(weak_set);
  ValueObject gs;
  for (const auto& [env_id, g] : guidelines) gs[env_id] = g.to_value();
  o["guidelines"] = Value(std::move(gs));
  return Value(std::move(o));
}

DiagnosisReport DiagnosisReport::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  DiagnosisReport r;
  for (const Value& d : need(o, "env_stats").as_list())
    r.env_stats.push_back(EnvDiagnosis::from_value(d));
  r.median_pass_rate = need(o, "median_pass_rate").as_number();
  r.weak_set = string_list_from(need(o, "weak_set"));
  for (const auto& [env_id, g] : need(o, "guidelines").as_object())
    r.guidelines[env_id] = GuidelineRecord::from_value(g);
  return r;
}

DiagnosisReport diagnose(const EvalResults& results, const std::vector<TaskRecord>& suite,
                         const EnvMap& envs) {
  if (results.rows.empty()) throw ValueError("cannot diagnose empty evaluation results");
  if (results.traces.size() != results.rows.size())
    throw ValueError("evaluation rows and traces are out of sync");
  std::map<std::string, const TaskRecord*> by_id;
  for (const TaskRecord& t : suite) by_id[t.task_id] = &t;

  std::map<std::string, EnvDiagnosis> stats;
  std::map<std::string, std::set<std::string>> implicated;
  for (std::size_t i = 0; i < results.rows.size(); ++i) {
    const EvalRow& row = results.rows[i];
    auto ti = by_id.find(row.task_id);
    if (ti == by_id.end())
      throw NotFoundError("no task record for evaluated task '" + row.task_id + "'", row.task_id);
    auto ei = envs.find(row.env_id);
    if (ei == envs.end()) throw NotFoundError("unknown environment '" + row.env_id + "'", row.env_id);
    EnvDiagnosis& d = stats[row.env_id];
    d.env_id = row.env_id;
    d.tasks += 1;
    if (row.reward == 1.0) {
      d.passes += 1;
    } else {
      const FailureMode m =
          classify_failure(*ti->second, results.traces[i], ei->second, row.outcome);
      d.failure_histogram[failure_mode_name(m)] += 1;
      std::set<std::string>& imp = implicated[row.env_id];
      for (const std::string& t : task_tool_set(*ti->second)) imp.insert(t);
    }
  }

  DiagnosisReport rep;
  std::vector<double> rates;
  rates.reserve(stats.size());
  for (auto& [env_id, d] : stats) {
    d.pass_rate = static_cast<double>(d.passes) / static_cast<double>(d.tasks);
    rates.push_back(d.pass_rate);
    rep.env_stats.push_back(d);
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t n = rates.size();
  rep.median_pass_rate = (n % 2 == 1) ? rates[n / 2] : 0.5 * (rates[n / 2 - 1] + rates[n / 2]);

  std::vector<const EnvDiagnosis*> weak;
  for (const EnvDiagnosis& d : rep.env_stats)
    if (d.pass_rate < rep.median_pass_rate) weak.push_back(&d);
  std::sort(weak.begin(), weak.end(), [](const EnvDiagnosis* a, const EnvDiagnosis* b) {
    if (a->pass_rate != b->pass_rate) return a->pass_rate < b->pass_rate;
    return a->env_id < b->env_id;
  });

  for (const EnvDiagnosis* dp : weak) {
    const EnvDiagnosis& d = *dp;
    rep.weak_set.push_back(d.env_id);
    GuidelineRecord g;
    g.env_id = d.env_id;
    int top = 0;
    for (const auto& [mode, count] : d.failure_histogram) top = std::max(top, count);
    for (const auto& [mode, count] : d.failure_histogram)
      if (count == top && top > 0) g.dominant_modes.push_back(mode);
    auto dominant = [&g](const char* mode) {
      return std::find(g.dominant_modes.begin(), g.dominant_modes.end(), mode) !=
             g.dominant_modes.end();
    };
    if (dominant("budget_exhaustion")) g.walk_len_delta -= 1;
    if (dominant("wrong_tool")) g.obfuscation_delta -= 1;
    if (dominant("verifier_state_mismatch") || dominant("bad_grounding")) g.complexify = true;
    auto ii = implicated.find(d.env_id);
    if (ii != implicated.end()) g.boost_tools.assign(ii->second.begin(), ii->second.end());
    rep.guidelines[d.env_id] = std::move(g);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Targeted expansion

Value TargetedExpansion::to_value() const {
  ValueObject o;
  ValueList ts;
  ts.reserve(tasks.size());
  for (const TaskRecord& t : tasks) ts.push_back(t.to_value());
  o["tasks"] = Value(std::move(ts));
  o["complexified"] = string_list_value(complexified);
  o["flagged_envs"] = string_list_value(flagged_envs);
  return Value(std::move(o));
}

TargetedExpansion TargetedExpansion::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  TargetedExpansion t;
  for (const Value& x : need(o, "tasks").as_list()) t.tasks.push_back(TaskRecord::from_value(x));
  t.complexified = string_list_from(need(o, "complexified"));
  t.flagged_envs = string_list_from(need(o, "flagged_envs"));
  return t;
}

TargetedExpansion targeted_expand(const DiagnosisReport& report, EnvMap& envs,
                                  const DifficultyKnobs& base_knobs, int per_env_graph,
                                  int per_env_prog, int round, const ComplexifyKnobs& growth,
                                  double boost_factor, std::uint64_t seed) {
  if (boost_factor <= 0.0) throw ValueError("boost factor must be positive");
  if (round < 0) throw ValueError("round must be non-negative");
  TargetedExpansion out;
  const std::string prefix = "t" + std::to_string(round) + "-";
  for (const std::string& env_id : report.weak_set) {
    auto gi = report.guidelines.find(env_id);
    if (gi == report.guidelines.end())
      throw NotFoundError("weak environment '" + env_id + "' has no guideline", env_id);
    const GuidelineRecord& g = gi->second;
    auto ei = envs.find(env_id);
    if (ei == envs.end())
      throw NotFoundError("weak environment '" + env_id + "' is missing from the environment set", env_id);
    EnvironmentBundle& env = ei->second;
    const ThemeTemplate& theme = builtin_theme(env.theme);

    if (g.complexify && growth.rounds > 0) {
      EnvironmentBundle backup = env;
      try {
        env.db = complexify_database(env.db, growth, derive_seed(seed, env_id, 1));
        refresh_unit_cases(env, theme, derive_seed(seed, env_id, 2));
        out.complexified.push_back(env_id);
      } catch (const Error&) {
        env = std::move(backup);  // growth failed: keep the environment as it was
      }
    }

    DifficultyKnobs knobs = base_knobs;
    knobs.max_walk_len =
        std::max<std::int64_t>(1, knobs.max_walk_len + static_cast<std::int64_t>(g.walk_len_delta));
    knobs.obfuscation_level = std::clamp(knobs.obfuscation_level + g.obfuscation_delta, 0, 2);
    std::map<std::string, double> boost;
    for (const std::string& t : g.boost_tools) boost[t] = boost_factor;

    try {
      std::vector<TaskRecord> ts = synthesize_tasks(env, theme, knobs, per_env_graph, per_env_prog,
                                                    derive_seed(seed, env_id, 3), prefix, boost);
      for (TaskRecord& t : ts) out.tasks.push_back(std::move(t));
    } catch (const Error&) {
      out.flagged_envs.push_back(env_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// The self-evolution loop

Value ArenaConfig::to_value() const {
  ValueObject o;
  o["k"] = Value(static_cast<std::int64_t>(k));
  o["per_env_graph"] = Value(static_cast<std::int64_t>(per_env_graph));
  o["per_env_prog"] = Value(static_cast<std::int64_t>(per_env_prog));
  o["targeted_graph"] = Value(static_cast<std::int64_t>(targeted_graph));
  o["targeted_prog"] = Value(static_cast<std::int64_t>(targeted_prog));
  o["budget"] = Value(static_cast<std::int64_t>(budget));
  o["boost_factor"] = Value(boost_factor);
  o["hold_out_arena"] = Value(hold_out_arena);
  o["knobs"] = knobs.to_value();
  o["growth"] = growth.to_value();
  o["train"] = train.to_value();
  o["out_dir"] = Value(out_dir);
  return Value(std::move(o));
}

ArenaConfig ArenaConfig::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  ArenaConfig c;
  c.k = static_cast<int>(need(o, "k").as_int());
  c.per_env_graph = static_cast<int>(need(o, "per_env_graph").as_int());
  c.per_env_prog = static_cast<int>(need(o, "per_env_prog").as_int());
  c.targeted_graph = static_cast<int>(need(o, "targeted_graph").as_int());
  c.targeted_prog = static_cast<int>(need(o, "targeted_prog").as_int());
  c.budget = static_cast<int>(need(o, "budget").as_int());
  c.boost_factor = need(o, "boost_factor").as_number();
  c.hold_out_arena = need(o, "hold_out_arena").as_bool();
  c.knobs = DifficultyKnobs::from_value(need(o, "knobs"));
  c.growth = ComplexifyKnobs::from_value(need(o, "growth"));
  c.train = GrpoConfig::from_value(need(o, "train"));
  c.out_dir = need(o, "out_dir").as_string();
  return c;
}

Value ArenaRoundReport::to_value() const {
  ValueObject o;
  o["round"] = Value(static_cast<std::int64_t>(round));
  o["seed"] = Value(seed);
  o["config"] = config;
  o["eval_task_ids"] = string_list_value(eval_task_ids);
  o["flagged_envs"] = string_list_value(flagged_envs);
  ValueList rs;
  rs.reserve(eval_rows.size());
  for (const EvalRow& r : eval_rows) rs.push_back(r.to_value());
  o["eval_rows"] = Value(std::move(rs));
  o["pre_per_env"] = pass_count_map_value(pre_per_env);
  o["post_per_env"] = pass_count_map_value(post_per_env);
  o["pre_pass_rate"] = Value(pre_pass_rate);
  o["post_pass_rate"] = Value(post_pass_rate);
  o["diagnosis"] = diagnosis.to_value();
  o["targeted_task_ids"] = string_list_value(targeted_task_ids);
  o["complexified"] = string_list_value(complexified);
  o["train_summary"] = train_summary;
  return Value(std::move(o));
}

ArenaRoundReport ArenaRoundReport::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  ArenaRoundReport r;
  r.round = static_cast<int>(need(o, "round").as_int());
  r.seed = need(o, "seed").as_string();
  r.config = need(o, "config");
  r.eval_task_ids = string_list_from(need(o, "eval_task_ids"));
  r.flagged_envs = string_list_from(need(o, "flagged_envs"));
  for (const Value& row : need(o, "eval_rows").as_list())
    r.eval_rows.push_back(EvalRow::from_value(row));
  r.pre_per_env = pass_count_map_from(need(o, "pre_per_env"));
  r.post_per_env = pass_count_map_from(need(o, "post_per_env"));
  r.pre_pass_rate = need(o, "pre_pass_rate").as_number();
  r.post_pass_rate = need(o, "post_pass_rate").as_number();
  r.diagnosis = DiagnosisReport::from_value(need(o, "diagnosis"));
  r.targeted_task_ids = string_list_from(need(o, "targeted_task_ids"));
  r.complexified = string_list_from(need(o, "complexified"));
  r.train_summary = need(o, "train_summary");
  return r;
}

SelfEvolutionResult run_self_evolution(const PolicyParams& init,
                                       const std::vector<EnvironmentBundle>& ecosystem,
                                       const Taxonomy& taxonomy, const ArenaConfig& cfg,
                                       int rounds, std::uint64_t seed) {
  if (rounds < 1) throw ValueError("self-evolution needs at least one round");
  if (cfg.budget < 1) throw ValueError("episode budget must be at least 1");

  const ArenaSet arena_set = build_arena(taxonomy, cfg.k, derive_seed(seed, "arena"));
  EnvMap envs;
  {
    std::map<std::string, const EnvironmentBundle*> by_id;
    for (const EnvironmentBundle& e : ecosystem) by_id[e.env_id] = &e;
    for (const std::string& id : arena_set.members) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw NotFoundError("arena member '" + id + "' is not in the ecosystem", id);
      envs.emplace(id, *it->second);
    }
  }

  SelfEvolutionResult out;
  PolicyParams params = init;
  for (int r = 0; r < rounds; ++r) {
    const std::uint64_t round_seed = derive_seed(seed, "round", static_cast<std::uint64_t>(r));
    ArenaRoundReport rep;
    rep.round = r;
    rep.seed = std::to_string(seed);
    rep.config = cfg.to_value();

    // Phase 1: fresh evaluation suite, one seeded episode per task.
    EvalRoundSuite suite = synthesize_eval_round(arena_set, envs, r, cfg.per_env_graph,
                                                 cfg.per_env_prog, cfg.knobs,
                                                 derive_seed(round_seed, "eval"));
    rep.flagged_envs = suite.flagged_envs;
    for (const TaskRecord& t : suite.tasks) rep.eval_task_ids.push_back(t.task_id);
    // The suite's tasks are grounded against the environments as they stand
    // now; evaluate before and after training against this same frozen state
    // so both measurements score against matching ground truth.
    const EnvMap eval_envs = envs;
    SoftmaxPolicy pre_policy(params);
    EvalResults pre = evaluate_policy(pre_policy, suite.tasks, eval_envs, cfg.budget,
                                      derive_seed(round_seed, "preeval"));
    rep.eval_rows = pre.rows;
    rep.pre_per_env = pre.per_env;
    rep.pre_pass_rate = pre.pass_rate;

    // Phase 2: rule-based diagnosis over the failed traces.
    rep.diagnosis = diagnose(pre, suite.tasks, eval_envs);

    // Phase 3: targeted expansion of the weak set, then continued training.
    TargetedExpansion tx =
        targeted_expand(rep.diagnosis, envs, cfg.knobs, cfg.targeted_graph, cfg.targeted_prog, r,
                        cfg.growth, cfg.boost_factor, derive_seed(round_seed, "target"));
    for (const TaskRecord& t : tx.tasks) rep.targeted_task_ids.push_back(t.task_id);
    rep.complexified = tx.complexified;
    if (!tx.tasks.empty() && cfg.train.steps > 0) {
      std::vector<TrainTask> train_tasks;
      train_tasks.reserve(tx.tasks.size());
      for (const TaskRecord& t : tx.tasks)
        train_tasks.push_back(TrainTask{&t, &envs.at(t.env_id)});
      TrainResult tr = train(train_tasks, params, cfg.train, derive_seed(round_seed, "retrain"));
      params = tr.params;
      rep.train_summary = tr.summary();
    }

    SoftmaxPolicy post_policy(params);
    EvalResults post = evaluate_policy(post_policy, suite.tasks, eval_envs, cfg.budget,
                                       derive_seed(round_seed, "posteval"));
    rep.post_per_env = post.per_env;
    rep.post_pass_rate = post.pass_rate;

    if (!cfg.out_dir.empty()) {
      const std::string path = cfg.out_dir + "/arena_round_" + std::to_string(r) + ".json";
      std::ofstream f(path);
      if (!f) throw ValueError("cannot write round report '" + path + "'");
      f << canonical_dump(rep.to_value(), 2) << "\n";
    }
    out.rounds.push_back(std::move(rep));
  }
  out.final_params = std::move(params);
  return out;
}

}  // namespace arena
