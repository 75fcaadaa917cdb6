#include "arena/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "arena/dsl.hpp"
#include "arena/reward.hpp"
#include "arena/rng.hpp"

namespace arena {

namespace {

const Value& need(const ValueObject& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end()) throw ValueError("missing field '" + key + "'");
  return it->second;
}

bool kind_ok(bool is_any, Kind want, Kind got) { return is_any || want == got; }

Value last_result_or_null(const SessionState& s) {
  if (s.tool_results.empty()) return Value();
  return s.tool_results.back().second;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

Value Observation::to_value() const {
  ValueObject o;
  o["kind"] = Value(kind);
  o["payload"] = payload;
  o["error"] = Value(error);
  return Value(std::move(o));
}

Observation Observation::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  Observation ob;
  ob.kind = need(o, "kind").as_string();
  ob.payload = need(o, "payload");
  ob.error = need(o, "error").as_bool();
  return ob;
}

Value Action::to_value() const {
  ValueObject o;
  o["kind"] = Value(std::string(kind == Kind::ToolCall ? "tool_call" : "respond"));
  o["tool"] = Value(tool);
  o["args"] = Value(args);
  o["answer"] = answer;
  ValueObject src;
  for (const auto& [k, v] : arg_sources) src[k] = Value(v);
  o["arg_sources"] = Value(std::move(src));
  return Value(std::move(o));
}

Action Action::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  Action a;
  const std::string k = need(o, "kind").as_string();
  if (k == "tool_call") a.kind = Kind::ToolCall;
  else if (k == "respond") a.kind = Kind::Respond;
  else throw ValueError("unknown action kind '" + k + "'");
  a.tool = need(o, "tool").as_string();
  a.args = need(o, "args").as_object();
  a.answer = need(o, "answer");
  for (const auto& [name, sv] : need(o, "arg_sources").as_object())
    a.arg_sources[name] = sv.as_string();
  return a;
}

Value CandidateAction::to_value() const {
  ValueObject o;
  o["action"] = action.to_value();
  return Value(std::move(o));
}

CandidateAction CandidateAction::from_value(const Value& v) {
  CandidateAction c;
  c.action = Action::from_value(need(v.as_object(), "action"));
  return c;
}

Value PolicyParams::to_value() const {
  ValueObject o;
  ValueList t;
  for (double x : theta) t.emplace_back(x);
  o["theta"] = Value(std::move(t));
  o["temperature"] = Value(temperature);
  return Value(std::move(o));
}

PolicyParams PolicyParams::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  PolicyParams p;
  for (const Value& x : need(o, "theta").as_list()) p.theta.push_back(x.as_number());
  p.temperature = need(o, "temperature").as_number();
  return p;
}

PolicyParams zero_params(int dim, double temperature) {
  PolicyParams p;
  p.theta.assign(static_cast<std::size_t>(dim), 0.0);
  p.temperature = temperature;
  return p;
}

Value TrajectoryStep::to_value() const {
  ValueObject o;
  o["observation"] = observation.to_value();
  o["action"] = action.to_value();
  o["log_prob"] = Value(log_prob);
  o["chosen"] = Value(static_cast<std::int64_t>(chosen));
  o["n_candidates"] = Value(static_cast<std::int64_t>(n_candidates));
  return Value(std::move(o));
}

TrajectoryStep TrajectoryStep::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  TrajectoryStep s;
  s.observation = Observation::from_value(need(o, "observation"));
  s.action = Action::from_value(need(o, "action"));
  s.log_prob = need(o, "log_prob").as_number();
  s.chosen = static_cast<int>(need(o, "chosen").as_int());
  s.n_candidates = static_cast<int>(need(o, "n_candidates").as_int());
  return s;  // candidate features are not part of the summary form
}

Value Trajectory::to_value() const {
  ValueObject o;
  o["task_id"] = Value(task_id);
  ValueList sl;
  for (const TrajectoryStep& s : steps) sl.push_back(s.to_value());
  o["steps"] = Value(std::move(sl));
  o["final_answer"] = final_answer;
  ValueObject db;
  db["digest"] = Value(std::to_string(final_db.digest));
  db["db"] = final_db.db.to_value();
  o["final_db"] = Value(std::move(db));
  o["terminated"] = Value(terminated);
  return Value(std::move(o));
}

Trajectory Trajectory::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  Trajectory t;
  t.task_id = need(o, "task_id").as_string();
  for (const Value& sv : need(o, "steps").as_list())
    t.steps.push_back(TrajectoryStep::from_value(sv));
  t.final_answer = need(o, "final_answer");
  const ValueObject& db = need(o, "final_db").as_object();
  t.final_db.db = Database::from_value(need(db, "db"));
  t.final_db.digest = std::stoull(need(db, "digest").as_string());
  t.terminated = need(o, "terminated").as_string();
  return t;
}

// ---------------------------------------------------------------------------
// Session dynamics

SessionState reset_session(const TaskRecord& task, const EnvironmentBundle& env) {
  if (task.env_id != env.env_id)
    throw ValueError("task " + task.task_id + " belongs to " + task.env_id + ", not " +
                     env.env_id);
  SessionState s;
  s.env = &env;
  s.task = &task;
  s.db = env.db;
  Observation opening;
  opening.kind = "task";
  opening.payload = Value(task.description);
  s.dialogue.push_back(std::move(opening));
  return s;
}

Observation step_session(SessionState& s, const Action& a) {
  if (s.terminated) throw ValueError("session already terminated");
  Observation obs;
  if (a.kind == Action::Kind::Respond) {
    s.final_answer = a.answer;
    s.terminated = true;
    obs.kind = "termination";
    obs.payload = a.answer;
  } else {
    ++s.steps_taken;
    const CheckedTool* ct = s.env->find_tool(a.tool);
    if (!ct) {
      obs.kind = "tool_error";
      obs.error = true;
      ValueObject e;
      e["error"] = Value(std::string("not_found"));
      e["message"] = Value("unknown tool '" + a.tool + "'");
      obs.payload = Value(std::move(e));
      s.last_error = true;
    } else {
      EvalOutcome out = evaluate_program(*ct->program, s.db, a.args);
      obs.payload = out.observation_payload();
      if (out.ok) {
        s.db = out.db_after;
        for (const WriteOp& w : out.writes) s.write_log.push_back(w);
        s.tool_results.emplace_back(a.tool, out.value);
        s.last_error = false;
        obs.kind = "tool_result";
      } else {
        s.last_error = true;
        obs.kind = "tool_error";
        obs.error = true;
      }
    }
  }
  s.dialogue.push_back(obs);
  return obs;
}

// ---------------------------------------------------------------------------
// Candidate enumeration

namespace {

// Ordered grounding options for one parameter: prior outputs (most recent
// first), then database values in collection/document order, then document
// ids via the "<stem>_id" rule; deduplicated, first occurrence wins.
std::vector<std::pair<Value, std::string>> param_options(const SessionState& s,
                                                         const ParamSig& p) {
  std::vector<std::pair<Value, std::string>> out;
  auto push = [&](const Value& v, const char* src) {
    for (const auto& [have, tag] : out)
      if (have == v) return;
    out.emplace_back(v, src);
  };
  for (auto it = s.tool_results.rbegin(); it != s.tool_results.rend(); ++it) {
    if (!it->second.is_object()) continue;
    const ValueObject& o = it->second.as_object();
    auto f = o.find(p.name);
    if (f == o.end()) continue;
    if (!kind_ok(p.is_any, p.kind, f->second.kind())) continue;
    push(f->second, "prior_output");
  }
  const Database& db = s.env->db;
  for (const auto& [coll, schema] : db.schema) {
    bool declared = false;
    for (const FieldDesc& f : schema)
      if (f.name == p.name && kind_ok(p.is_any, p.kind, f.kind)) declared = true;
    if (!declared) continue;
    for (const Value& doc : db.collection(coll)) {
      auto f = doc.as_object().find(p.name);
      if (f == doc.as_object().end() || f->second.is_null()) continue;
      push(f->second, "database");
    }
  }
  const std::string suffix = "_id";
  if (p.name.size() > suffix.size() &&
      p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) == 0 &&
      (p.is_any || p.kind == Kind::String)) {
    std::string stem = p.name.substr(0, p.name.size() - suffix.size());
    std::string coll;
    if (db.has_collection(stem)) coll = stem;
    else if (db.has_collection(stem + "s")) coll = stem + "s";
    if (!coll.empty())
      for (const Value& doc : db.collection(coll)) push(doc.as_object().at("id"), "database");
  }
  return out;
}

}  // namespace

std::vector<CandidateAction> enumerate_candidates(const SessionState& s,
                                                  int max_bindings_per_tool) {
  if (max_bindings_per_tool < 1) throw ValueError("max_bindings_per_tool must be positive");
  std::vector<CandidateAction> out;
  for (const CheckedTool& t : s.env->tools) {
    const ToolSignature& sig = t.sig();
    std::vector<const ParamSig*> params;
    std::vector<std::vector<std::pair<Value, std::string>>> options;
    bool groundable = true;
    for (const ParamSig& p : sig.params) {
      if (!p.required) continue;  // optional parameters stay unbound
      auto opts = param_options(s, p);
      if (opts.empty()) {
        groundable = false;
        break;
      }
      params.push_back(&p);
      options.push_back(std::move(opts));
    }
    if (!groundable) continue;
    std::size_t max_opts = 1;
    for (const auto& o : options) max_opts = std::max(max_opts, o.size());
    std::size_t bindings = std::min<std::size_t>(static_cast<std::size_t>(max_bindings_per_tool),
                                                 max_opts);
    for (std::size_t k = 0; k < bindings; ++k) {
      CandidateAction c;
      c.action.kind = Action::Kind::ToolCall;
      c.action.tool = sig.name;
      for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& [v, src] = options[pi][k % options[pi].size()];
        c.action.args[params[pi]->name] = v;
        c.action.arg_sources[params[pi]->name] = src;
      }
      out.push_back(std::move(c));
    }
  }
  CandidateAction respond;
  respond.action.kind = Action::Kind::Respond;
  respond.action.answer = last_result_or_null(s);
  out.push_back(std::move(respond));
  return out;
}

// ---------------------------------------------------------------------------
// Features

int step_bucket(int steps_taken) {
  if (steps_taken <= 0) return 0;
  if (steps_taken <= 2) return 1;
  if (steps_taken <= 5) return 2;
  return 3;
}

std::vector<double> featurize_candidate(const SessionState& s, const CandidateAction& c) {
  std::vector<double> f(static_cast<std::size_t>(kFeatureDim), 0.0);
  const int sb = step_bucket(s.steps_taken);
  if (c.action.kind == Action::Kind::Respond) {
    f[static_cast<std::size_t>(kToolHashBuckets * kStepBuckets + sb)] = 1.0;
  } else {
    const std::size_t bucket = fnv1a(c.action.tool) % kToolHashBuckets;
    f[bucket * kStepBuckets + static_cast<std::size_t>(sb)] = 1.0;
  }
  const std::size_t base = static_cast<std::size_t>(kToolHashBuckets * kStepBuckets + kStepBuckets);
  for (const auto& [name, src] : c.action.arg_sources) {
    if (src == "prior_output") f[base] += 1.0;
    else if (src == "database") f[base + 1] += 1.0;
    else f[base + 2] += 1.0;
  }
  f[base + 3] = s.last_error ? 1.0 : 0.0;
  f[base + 4] = 1.0;
  return f;
}

std::vector<std::vector<double>> featurize_candidates(const SessionState& s,
                                                      const std::vector<CandidateAction>& cs) {
  std::vector<std::vector<double>> out;
  out.reserve(cs.size());
  for (const CandidateAction& c : cs) out.push_back(featurize_candidate(s, c));
  return out;
}

// ---------------------------------------------------------------------------
// Softmax policy math

std::vector<double> softmax_policy_probs(const PolicyParams& p,
                                         const std::vector<std::vector<double>>& feats) {
  if (feats.empty()) throw ValueError("softmax over an empty candidate set");
  if (p.temperature <= 0.0) throw ValueError("temperature must be positive");
  std::vector<double> logits;
  logits.reserve(feats.size());
  for (const auto& f : feats) {
    if (f.size() != p.theta.size())
      throw ValueError("feature dimension " + std::to_string(f.size()) +
                       " does not match parameter dimension " + std::to_string(p.theta.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) dot += p.theta[i] * f[i];
    logits.push_back(dot / p.temperature);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

std::pair<double, std::vector<double>> softmax_policy_logprob_grad(
    const PolicyParams& p, const std::vector<std::vector<double>>& feats, int chosen) {
  if (chosen < 0 || static_cast<std::size_t>(chosen) >= feats.size())
    throw ValueError("chosen candidate out of range");
  std::vector<double> probs = softmax_policy_probs(p, feats);
  std::vector<double> mean(p.theta.size(), 0.0);
  for (std::size_t c = 0; c < feats.size(); ++c)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += probs[c] * feats[c][i];
  std::vector<double> grad(p.theta.size(), 0.0);
  const auto& fc = feats[static_cast<std::size_t>(chosen)];
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad[i] = (fc[i] - mean[i]) / p.temperature;
  return {std::log(probs[static_cast<std::size_t>(chosen)]), std::move(grad)};
}

// ---------------------------------------------------------------------------
// Policies

ActResult RandomPolicy::act(const SessionState& s, Rng& rng) {
  std::vector<CandidateAction> cands = enumerate_candidates(s);
  ActResult r;
  r.features = featurize_candidates(s, cands);
  r.chosen = static_cast<int>(rng.bounded(static_cast<std::int64_t>(cands.size())));
  r.action = cands[static_cast<std::size_t>(r.chosen)].action;
  r.log_prob = -std::log(static_cast<double>(cands.size()));
  return r;
}

ActResult SoftmaxPolicy::act(const SessionState& s, Rng& rng) {
  std::vector<CandidateAction> cands = enumerate_candidates(s);
  ActResult r;
  r.features = featurize_candidates(s, cands);
  std::vector<double> probs = softmax_policy_probs(params_, r.features);
  r.chosen = static_cast<int>(rng.weighted(probs));
  r.action = cands[static_cast<std::size_t>(r.chosen)].action;
  r.log_prob = std::log(probs[static_cast<std::size_t>(r.chosen)]);
  return r;
}

namespace {

// Kind-preserving corruption for tool arguments: the call still type-checks
// but targets the wrong thing.
Value corrupt_arg(const Value& v) {
  switch (v.kind()) {
    case Kind::String: return Value(v.as_string() + "_corrupted");
    case Kind::Int: return Value(v.as_int() + 999979);
    case Kind::Float: return Value(v.as_float() + 999979.25);
    case Kind::Bool: return Value(!v.as_bool());
    default: return Value(std::string("corrupted"));
  }
}

// Kind-breaking corruption for answers: guaranteed to fail schema/field
// criteria whatever the expected value was.
Value corrupt_answer(const Value& v) {
  if (v.is_object()) {
    ValueObject o;
    o["corrupted"] = Value(true);
    return Value(std::move(o));
  }
  if (v.is_string()) return Value(v.as_string() + "_corrupted");
  return Value(std::string("corrupted"));
}

}  // namespace

ActResult BaselinePolicy::act(const SessionState& s, Rng& rng) {
  const TaskRecord& task = *s.task;
  const bool corrupt = error_rate_ > 0.0 && rng.bernoulli(error_rate_);
  ActResult r;
  Action a;
  auto scripted_call = [&](const std::string& tool, ValueObject args,
                           std::map<std::string, std::string> sources) {
    a.kind = Action::Kind::ToolCall;
    a.tool = tool;
    a.args = std::move(args);
    a.arg_sources = std::move(sources);
    if (corrupt && !a.args.empty()) {
      auto it = a.args.begin();
      it->second = corrupt_arg(it->second);
    }
  };
  auto scripted_respond = [&](Value answer) {
    a.kind = Action::Kind::Respond;
    a.answer = corrupt ? corrupt_answer(answer) : std::move(answer);
  };
  if (task.kind == "graph") {
    const std::size_t idx = static_cast<std::size_t>(s.steps_taken);
    if (idx < task.chain.steps.size()) {
      const ChainStep& st = task.chain.steps[idx];
      std::map<std::string, std::string> sources;
      for (const auto& [name, prov] : st.provenance) {
        switch (prov.source) {
          case ArgProvenance::Source::PriorOutput: sources[name] = "prior_output"; break;
          case ArgProvenance::Source::DatabaseValue: sources[name] = "database"; break;
          case ArgProvenance::Source::Constant: sources[name] = "constant"; break;
        }
      }
      scripted_call(st.tool, st.args, std::move(sources));
    } else {
      scripted_respond(last_result_or_null(s));
    }
  } else {
    const ValueObject& ta = task.template_args.as_object();
    auto ids_it = ta.find("target_ids");
    if (ids_it != ta.end()) {
      const ValueList& ids = ids_it->second.as_list();
      const std::size_t idx = static_cast<std::size_t>(s.steps_taken);
      if (idx < ids.size()) {
        ValueObject args;
        args[ta.at("id_param").as_string()] = ids[idx];
        scripted_call(ta.at("tool").as_string(),
                      std::move(args),
                      {{ta.at("id_param").as_string(), "database"}});
      } else {
        scripted_respond(task.ground_truth);
      }
    } else {
      scripted_respond(task.ground_truth);
    }
  }
  r.action = std::move(a);
  return r;
}

// ---------------------------------------------------------------------------
// Episodes

Trajectory run_episode(Policy& policy, const TaskRecord& task, const EnvironmentBundle& env,
                       int budget, std::uint64_t seed) {
  if (budget < 0) throw ValueError("budget must be non-negative");
  SessionState s = reset_session(task, env);
  Rng rng(derive_seed(seed, "episode"));
  Trajectory traj;
  traj.task_id = task.task_id;
  while (!s.terminated) {
    if (s.steps_taken >= budget) {
      Action a;
      a.kind = Action::Kind::Respond;
      a.answer = last_result_or_null(s);
      Observation obs = step_session(s, a);
      TrajectoryStep ts;
      ts.observation = std::move(obs);
      ts.action = std::move(a);
      traj.steps.push_back(std::move(ts));
      traj.terminated = "step_budget";
      break;
    }
    ActResult ar = policy.act(s, rng);
    Observation obs = step_session(s, ar.action);
    TrajectoryStep ts;
    ts.observation = std::move(obs);
    ts.action = std::move(ar.action);
    ts.log_prob = ar.log_prob;
    ts.features = std::move(ar.features);
    ts.chosen = ar.chosen;
    ts.n_candidates = static_cast<int>(ts.features.size());
    traj.steps.push_back(std::move(ts));
    if (s.terminated) traj.terminated = "responded";
  }
  traj.final_answer = s.final_answer;
  traj.final_db = snapshot_database(s.db);
  return traj;
}

RolloutGroup run_group(Policy& policy, const TaskRecord& task, const EnvironmentBundle& env,
                       int group_size, int budget, std::uint64_t seed) {
  if (group_size < 2) throw ValueError("group size must be at least 2");
  RolloutGroup g;
  g.task_id = task.task_id;
  for (int i = 0; i < group_size; ++i) {
    Trajectory t =
        run_episode(policy, task, env, budget, derive_seed(seed, "member", static_cast<std::uint64_t>(i)));
    Database final_db = restore_database(t.final_db);
    g.rewards.push_back(score_trajectory(task, t.final_answer, final_db).reward);
    g.members.push_back(std::move(t));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Consistency filtering

bool baseline_attempt(const TaskRecord& task, const EnvironmentBundle& env, double error_rate,
                      std::uint64_t seed, int budget) {
  BaselinePolicy policy(error_rate);
  Trajectory t = run_episode(policy, task, env, budget, seed);
  Database final_db = restore_database(t.final_db);
  return score_trajectory(task, t.final_answer, final_db).reward == 1.0;
}

ConsistencyDecision consistency_filter(const TaskRecord& task, const EnvironmentBundle& env,
                                       double error_rate, std::uint64_t seed, int runs,
                                       int min_pass, int budget) {
  if (runs < 1) throw ValueError("consistency filter needs at least one run");
  ConsistencyDecision d;
  int passed = 0;
  for (int i = 0; i < runs; ++i) {
    bool ok = baseline_attempt(task, env, error_rate,
                               derive_seed(seed, "run", static_cast<std::uint64_t>(i)), budget);
    d.passes.push_back(ok);
    if (ok) ++passed;
  }
  d.keep = passed >= min_pass;
  return d;
}

}  // namespace arena
