// Closed-loop sessions: reset/step dynamics with rollback-on-error, candidate
// enumeration, the fixed feature layout, softmax policy math (with a
// finite-difference check of the log-probability gradient), seeded episodes
// and groups, the scripted reference solver, and consistency filtering.

#include <cmath>
#include <set>

#include "arena/reward.hpp"
#include "arena/rollout.hpp"
#include "doctest.h"

using namespace arena;

namespace {

EnvironmentBundle make_env(const std::string& theme, std::uint64_t seed) {
  return generate_environment(builtin_theme(theme), seed);
}

TaskRecord make_graph_task(const EnvironmentBundle& env, const std::string& theme,
                           const std::vector<std::string>& walk, std::uint64_t seed) {
  GroundedChain chain = ground_and_refine_chain(walk, env, seed);
  GroundTruth truth = derive_ground_truth(chain, env);
  return generate_graph_task(chain, truth, env, builtin_theme(theme), DifficultyKnobs{}, seed);
}

TaskRecord make_prog_task(const std::string& family, const EnvironmentBundle& env,
                          const std::string& theme, std::uint64_t master) {
  for (std::uint64_t s = 0; s < 60; ++s) {
    try {
      return generate_programmatic_task(family, env, builtin_theme(theme), DifficultyKnobs{},
                                        derive_seed(master, "p", s));
    } catch (const SynthesisError&) {
    }
  }
  FAIL("no instantiation of ", family, " succeeded");
  return {};
}

Action call(const std::string& tool, const ValueObject& args) {
  Action a;
  a.kind = Action::Kind::ToolCall;
  a.tool = tool;
  a.args = args;
  return a;
}

Action respond(Value answer) {
  Action a;
  a.kind = Action::Kind::Respond;
  a.answer = std::move(answer);
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("sessions reset cleanly and apply tool calls transactionally") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"count_papers"}, 3);

  SessionState s = reset_session(task, env);
  REQUIRE(s.dialogue.size() == 1);
  CHECK(s.dialogue[0].kind == "task");
  CHECK(s.dialogue[0].payload == Value(task.description));
  CHECK(database_dump(s.db) == database_dump(env.db));
  CHECK(s.steps_taken == 0);
  CHECK(!s.terminated);

  const std::string topic = task.chain.steps[0].args.at("topic").as_string();

  SUBCASE("successful call commits and records the result") {
    Observation obs = step_session(s, call("count_papers", {{"topic", Value(topic)}}));
    CHECK(obs.kind == "tool_result");
    CHECK(!obs.error);
    CHECK(obs.payload == task.ground_truth);
    CHECK(s.steps_taken == 1);
    REQUIRE(s.tool_results.size() == 1);
    CHECK(s.tool_results[0].first == "count_papers");
    CHECK(!s.last_error);
    CHECK(!s.terminated);
  }

  SUBCASE("failed call rolls the database back and the episode continues") {
    const std::string before = database_dump(s.db);
    Observation obs = step_session(s, call("get_paper", {{"paper_id", Value(std::string("zzz"))}}));
    CHECK(obs.kind == "tool_error");
    CHECK(obs.error);
    CHECK(obs.payload.as_object().at("error") == Value(std::string("assert_failed")));
    CHECK(database_dump(s.db) == before);
    CHECK(s.steps_taken == 1);
    CHECK(s.tool_results.empty());
    CHECK(s.write_log.empty());
    CHECK(s.last_error);
    CHECK(!s.terminated);
  }

  SUBCASE("unknown tools produce a synthetic not_found error") {
    Observation obs = step_session(s, call("no_such_tool", {}));
    CHECK(obs.kind == "tool_error");
    CHECK(obs.payload.as_object().at("error") == Value(std::string("not_found")));
    CHECK(s.steps_taken == 1);
    CHECK(s.last_error);
  }

  SUBCASE("mutations commit writes and responding freezes the state") {
    const Value pid = env.db.collection("papers")[0].as_object().at("id");
    Observation obs = step_session(s, call("flag_paper", {{"paper_id", pid}}));
    CHECK(obs.kind == "tool_result");
    CHECK(!s.write_log.empty());
    CHECK(database_dump(s.db) != database_dump(env.db));
    const std::string mutated = database_dump(s.db);

    Observation done = step_session(s, respond(Value(std::int64_t{7})));
    CHECK(done.kind == "termination");
    CHECK(s.terminated);
    CHECK(s.final_answer == Value(std::int64_t{7}));
    CHECK(database_dump(s.db) == mutated);  // respond never touches the db
    CHECK_THROWS_AS(step_session(s, respond(Value())), ValueError);
  }

  SUBCASE("a session refuses a task from another environment") {
    EnvironmentBundle other = make_env("hotels", 52);
    CHECK_THROWS_AS(reset_session(task, other), ValueError);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("candidate enumeration is exhaustive, deduplicated and deterministic") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"count_papers"}, 3);
  SessionState s = reset_session(task, env);

  // Oracle counts from the database: distinct topics and paper ids.
  std::set<std::string> topics;
  for (const Value& doc : env.db.collection("papers"))
    topics.insert(doc.as_object().at("topic").as_string());
  const int n_topics = static_cast<int>(topics.size());
  const int n_papers = static_cast<int>(env.db.collection("papers").size());
  const int topic_bindings = std::min(4, n_topics);
  const int id_bindings = std::min(4, n_papers);

  std::vector<CandidateAction> cands = enumerate_candidates(s);
  // find_paper, avg_citations, count_papers bind topic; get_paper, author_of,
  // flag_paper bind paper_id; plus the trailing respond.
  CHECK(static_cast<int>(cands.size()) == 3 * topic_bindings + 3 * id_bindings + 1);

  CHECK(cands.back().action.kind == Action::Kind::Respond);
  CHECK(cands.back().action.answer.is_null());
  for (std::size_t i = 0; i + 1 < cands.size(); ++i) {
    const Action& a = cands[i].action;
    REQUIRE(a.kind == Action::Kind::ToolCall);
    CHECK(a.args.size() == 1);
    for (const auto& [name, src] : a.arg_sources) CHECK(src == "database");
  }

  // Same state, same candidates, bit for bit.
  std::vector<CandidateAction> again = enumerate_candidates(s);
  REQUIRE(again.size() == cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i)
    CHECK(canonical_dump(again[i].to_value()) == canonical_dump(cands[i].to_value()));

  // Bindings for one tool are distinct values.
  std::set<std::string> seen_args;
  for (const CandidateAction& c : cands)
    if (c.action.kind == Action::Kind::ToolCall && c.action.tool == "get_paper")
      seen_args.insert(canonical_dump(c.action.args.at("paper_id")));
  CHECK(static_cast<int>(seen_args.size()) == id_bindings);
}

TEST_CASE("prior outputs outrank database values and seed the respond answer") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"count_papers"}, 3);
  SessionState s = reset_session(task, env);
  const std::string topic = task.chain.steps[0].args.at("topic").as_string();
  step_session(s, call("find_paper", {{"topic", Value(topic)}}));
  REQUIRE(s.tool_results.size() == 1);
  const Value found_id = s.tool_results[0].second.as_object().at("paper_id");

  std::vector<CandidateAction> cands = enumerate_candidates(s);
  // The first get_paper binding now draws paper_id from the prior output.
  const CandidateAction* first_get = nullptr;
  for (const CandidateAction& c : cands)
    if (c.action.kind == Action::Kind::ToolCall && c.action.tool == "get_paper") {
      first_get = &c;
      break;
    }
  REQUIRE(first_get != nullptr);
  CHECK(first_get->action.args.at("paper_id") == found_id);
  CHECK(first_get->action.arg_sources.at("paper_id") == "prior_output");

  // The respond candidate now carries the latest successful result.
  CHECK(cands.back().action.kind == Action::Kind::Respond);
  CHECK(canonical_dump(cands.back().action.answer) ==
        canonical_dump(s.tool_results[0].second));
}

TEST_CASE("optional parameters are never bound by the enumerator") {
  EnvironmentBundle env = make_env("calendar", 64);
  TaskRecord task = make_graph_task(env, "calendar", {"is_holiday"}, 5);
  SessionState s = reset_session(task, env);
  bool saw_count_events = false;
  for (const CandidateAction& c : enumerate_candidates(s)) {
    if (c.action.kind != Action::Kind::ToolCall || c.action.tool != "count_events_on") continue;
    saw_count_events = true;
    CHECK(c.action.args.size() == 1);
    CHECK(c.action.args.count("day") == 1);
    CHECK(c.action.args.count("include_cancelled") == 0);
  }
  CHECK(saw_count_events);
}

// ---------------------------------------------------------------------------

TEST_CASE("features land in the documented slots") {
  CHECK(step_bucket(0) == 0);
  CHECK(step_bucket(1) == 1);
  CHECK(step_bucket(2) == 1);
  CHECK(step_bucket(3) == 2);
  CHECK(step_bucket(5) == 2);
  CHECK(step_bucket(6) == 3);
  CHECK(step_bucket(100) == 3);

  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"count_papers"}, 3);
  SessionState s = reset_session(task, env);
  std::vector<CandidateAction> cands = enumerate_candidates(s);
  std::vector<std::vector<double>> feats = featurize_candidates(s, cands);
  REQUIRE(feats.size() == cands.size());

  for (std::size_t i = 0; i < cands.size(); ++i) {
    REQUIRE(static_cast<int>(feats[i].size()) == kFeatureDim);
    CHECK(feats[i][72] == 1.0);  // bias always on
    CHECK(feats[i][71] == 0.0);  // no error yet
  }

  // A fresh-state tool call: one-hot at hash(tool) x bucket 0.
  const Action& a0 = cands[0].action;
  REQUIRE(a0.kind == Action::Kind::ToolCall);
  const int slot = static_cast<int>(fnv1a(a0.tool) % kToolHashBuckets) * kStepBuckets + 0;
  CHECK(feats[0][slot] == 1.0);
  double tool_block = 0.0, respond_block = 0.0;
  for (int j = 0; j < 64; ++j) tool_block += feats[0][j];
  for (int j = 64; j < 68; ++j) respond_block += feats[0][j];
  CHECK(tool_block == 1.0);
  CHECK(respond_block == 0.0);
  CHECK(feats[0][69] == 1.0);  // one database-sourced argument
  CHECK(feats[0][68] == 0.0);
  CHECK(feats[0][70] == 0.0);

  // The respond candidate: one-hot in the respond block instead.
  const std::vector<double>& rf = feats.back();
  CHECK(rf[64] == 1.0);
  double rt = 0.0;
  for (int j = 0; j < 64; ++j) rt += rf[j];
  CHECK(rt == 0.0);

  // After one success and one failure the bucket advances and the error bit
  // lights up.
  const std::string topic = task.chain.steps[0].args.at("topic").as_string();
  step_session(s, call("count_papers", {{"topic", Value(topic)}}));
  step_session(s, call("get_paper", {{"paper_id", Value(std::string("zzz"))}}));
  std::vector<CandidateAction> cands2 = enumerate_candidates(s);
  std::vector<std::vector<double>> feats2 = featurize_candidates(s, cands2);
  CHECK(feats2.back()[64 + step_bucket(2)] == 1.0);
  CHECK(feats2.back()[64] == 0.0);
  for (const std::vector<double>& f : feats2) CHECK(f[71] == 1.0);
}

// ---------------------------------------------------------------------------

TEST_CASE("softmax policy math is exact") {
  const std::vector<std::vector<double>> feats = {
      {1.0, 0.0, 0.5, -1.0, 0.2, 0.0},  {0.0, 2.0, -0.5, 0.3, 0.0, 1.0},
      {0.7, -0.2, 0.0, 0.0, 1.0, 0.4}, {-0.3, 0.1, 0.9, -0.6, 0.0, 0.2}};

  SUBCASE("zero parameters give a uniform distribution") {
    PolicyParams p = zero_params(6);
    std::vector<double> probs = softmax_policy_probs(p, feats);
    REQUIRE(probs.size() == 4);
    for (double q : probs) CHECK(q == doctest::Approx(0.25).epsilon(1e-12));
    auto [logp, grad] = softmax_policy_logprob_grad(p, feats, 2);
    CHECK(logp == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
    // grad = (phi_chosen - mean phi) / T; coordinate 0: 0.7 - 0.35.
    CHECK(grad[0] == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(grad[1] == doctest::Approx(-0.2 - (0.0 + 2.0 - 0.2 + 0.1) / 4.0).epsilon(1e-12));
  }

  SUBCASE("extreme temperature flattens any parameters") {
    PolicyParams p;
    p.theta = {3.0, -2.0, 1.5, 0.0, 4.0, -1.0};
    p.temperature = 1e8;
    for (double q : softmax_policy_probs(p, feats))
      CHECK(q == doctest::Approx(0.25).epsilon(1e-6));
  }

  SUBCASE("the analytic gradient matches central differences") {
    PolicyParams p;
    p.theta = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25};
    p.temperature = 0.7;
    for (int chosen : {0, 2, 3}) {
      auto [logp, grad] = softmax_policy_logprob_grad(p, feats, chosen);
      CHECK(std::isfinite(logp));
      const double h = 1e-5;
      for (std::size_t j = 0; j < p.theta.size(); ++j) {
        PolicyParams hi = p, lo = p;
        hi.theta[j] += h;
        lo.theta[j] -= h;
        const double fd = (softmax_policy_logprob_grad(hi, feats, chosen).first -
                           softmax_policy_logprob_grad(lo, feats, chosen).first) /
                          (2 * h);
        CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }

  SUBCASE("invalid inputs are rejected") {
    PolicyParams p = zero_params(6);
    CHECK_THROWS_AS(softmax_policy_probs(p, {}), ValueError);
    PolicyParams cold = zero_params(6, 0.0);
    CHECK_THROWS_AS(softmax_policy_probs(cold, feats), ValueError);
    PolicyParams wrong = zero_params(5);
    CHECK_THROWS_AS(softmax_policy_probs(wrong, feats), ValueError);
    CHECK_THROWS_AS(softmax_policy_logprob_grad(p, feats, 4), ValueError);
    CHECK_THROWS_AS(softmax_policy_logprob_grad(p, feats, -1), ValueError);
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("episodes are seeded, budgeted and serializable") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"find_paper", "get_paper"}, 7);

  SUBCASE("identical seeds give identical trajectories") {
    SoftmaxPolicy pol(zero_params());
    Trajectory t1 = run_episode(pol, task, env, 5, 99);
    Trajectory t2 = run_episode(pol, task, env, 5, 99);
    CHECK(canonical_dump(t1.to_value()) == canonical_dump(t2.to_value()));
    CHECK(t1.task_id == task.task_id);
    CHECK(t1.steps.size() <= 6);
    CHECK((t1.terminated == "responded" || t1.terminated == "step_budget"));

    // Round-trip through the summary serialization.
    Trajectory back = Trajectory::from_value(t1.to_value());
    CHECK(canonical_dump(back.to_value()) == canonical_dump(t1.to_value()));
    CHECK(back.final_db.digest == t1.final_db.digest);
  }

  SUBCASE("a zero budget forces an immediate empty respond") {
    SoftmaxPolicy pol(zero_params());
    Trajectory t = run_episode(pol, task, env, 0, 7);
    CHECK(t.terminated == "step_budget");
    REQUIRE(t.steps.size() == 1);
    CHECK(t.steps[0].action.kind == Action::Kind::Respond);
    CHECK(t.steps[0].chosen == -1);
    CHECK(t.steps[0].log_prob == 0.0);
    CHECK(t.steps[0].features.empty());
    CHECK(t.final_answer.is_null());
    CHECK_THROWS_AS(run_episode(pol, task, env, -1, 7), ValueError);
  }

  SUBCASE("random policies stay within budget") {
    RandomPolicy pol;
    for (std::uint64_t s = 0; s < 10; ++s) {
      Trajectory t = run_episode(pol, task, env, 3, s);
      CHECK(t.steps.size() <= 4);  // 3 tool calls + forced or chosen respond
      CHECK(!t.terminated.empty());
      for (const TrajectoryStep& st : t.steps)
        if (st.chosen >= 0) {
          CHECK(st.log_prob <= 0.0);
          CHECK(!st.features.empty());
        }
    }
  }
}

TEST_CASE("groups share the task but split their seeds") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"find_paper", "flag_paper"}, 13);
  RandomPolicy pol;
  RolloutGroup g1 = run_group(pol, task, env, 4, 6, 1234);
  RolloutGroup g2 = run_group(pol, task, env, 4, 6, 1234);
  REQUIRE(g1.members.size() == 4);
  REQUIRE(g1.rewards.size() == 4);
  CHECK(g1.task_id == task.task_id);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(canonical_dump(g1.members[i].to_value()) == canonical_dump(g2.members[i].to_value()));
    CHECK(g1.rewards[i] == g2.rewards[i]);
    CHECK((g1.rewards[i] == 0.0 || g1.rewards[i] == 1.0));
  }
  CHECK_THROWS_AS(run_group(pol, task, env, 1, 6, 1), ValueError);
}

// ---------------------------------------------------------------------------

TEST_CASE("the scripted solver replays graph chains exactly") {
  EnvironmentBundle env = make_env("arxiv", 41);
  TaskRecord task = make_graph_task(env, "arxiv", {"find_paper", "flag_paper"}, 13);
  BaselinePolicy base(0.0);
  Trajectory t = run_episode(base, task, env, 32, 5);
  CHECK(t.terminated == "responded");
  REQUIRE(t.steps.size() == task.chain.steps.size() + 1);
  CHECK(canonical_dump(t.final_answer) == canonical_dump(task.ground_truth));
  CHECK(t.final_db.digest == task.expected_db_digest);
  // Provenance flows through to the recorded action sources.
  CHECK(t.steps[1].action.arg_sources.at("paper_id") == "prior_output");
  CHECK(baseline_attempt(task, env, 0.0, 999));

  // Fully corrupted runs never earn the reward.
  CHECK(!baseline_attempt(task, env, 1.0, 999));
}

TEST_CASE("the scripted solver replays mutation templates and bare answers") {
  EnvironmentBundle env = make_env("emails", 61);

  SUBCASE("filtered mutations call the tool per target id") {
    TaskRecord task = make_prog_task("filtered-mutation", env, "emails", 404);
    const std::size_t n_ids = task.template_args.as_object().at("target_ids").as_list().size();
    BaselinePolicy base(0.0);
    Trajectory t = run_episode(base, task, env, 32, 8);
    CHECK(t.terminated == "responded");
    CHECK(t.steps.size() == n_ids + 1);
    CHECK(canonical_dump(t.final_answer) == canonical_dump(task.ground_truth));
    CHECK(t.final_db.digest == task.expected_db_digest);
    CHECK(baseline_attempt(task, env, 0.0, 31));
    CHECK(!baseline_attempt(task, env, 1.0, 31));
  }

  SUBCASE("read-only templates are answered immediately") {
    TaskRecord task = make_prog_task("aggregation", env, "emails", 505);
    BaselinePolicy base(0.0);
    Trajectory t = run_episode(base, task, env, 32, 8);
    CHECK(t.terminated == "responded");
    CHECK(t.steps.size() == 1);
    CHECK(canonical_dump(t.final_answer) == canonical_dump(task.ground_truth));
    CHECK(baseline_attempt(task, env, 0.0, 77));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("consistency filtering equals the exhaustive per-run tally") {
  EnvironmentBundle env = make_env("hotels", 52);
  TaskRecord task = make_graph_task(env, "hotels", {"find_hotel", "close_hotel"}, 17);

  for (double rate : {0.0, 0.4, 1.0}) {
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
      ConsistencyDecision d = consistency_filter(task, env, rate, seed, 5, 2, 32);
      REQUIRE(d.passes.size() == 5);
      int tally = 0;
      for (int i = 0; i < 5; ++i) {
        const bool pass =
            baseline_attempt(task, env, rate, derive_seed(seed, "run", static_cast<std::uint64_t>(i)), 32);
        CHECK(pass == d.passes[static_cast<std::size_t>(i)]);
        if (pass) ++tally;
      }
      CHECK(d.keep == (tally >= 2));
      if (rate == 0.0) CHECK(d.keep);
      if (rate == 1.0) CHECK(!d.keep);
    }
  }
}

TEST_CASE("actions and observations round-trip through their serial forms") {
  Action a = call("flag_paper", {{"paper_id", Value(std::string("p3"))}});
  a.arg_sources["paper_id"] = "prior_output";
  Action a2 = Action::from_value(a.to_value());
  CHECK(canonical_dump(a2.to_value()) == canonical_dump(a.to_value()));
  CHECK(a2.kind == Action::Kind::ToolCall);
  CHECK(a2.tool == "flag_paper");

  Action r = respond(Value(ValueObject{{"x", Value(std::int64_t{1})}}));
  Action r2 = Action::from_value(r.to_value());
  CHECK(r2.kind == Action::Kind::Respond);
  CHECK(canonical_dump(r2.answer) == canonical_dump(r.answer));

  Observation o;
  o.kind = "tool_error";
  o.payload = Value(ValueObject{{"error", Value(std::string("type_error"))}});
  o.error = true;
  Observation o2 = Observation::from_value(o.to_value());
  CHECK(o2.kind == "tool_error");
  CHECK(o2.error);
  CHECK(canonical_dump(o2.to_value()) == canonical_dump(o.to_value()));
}
