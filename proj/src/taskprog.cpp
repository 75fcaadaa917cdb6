#include <algorithm>
#include <set>

#include "arena/dsl.hpp"
#include "arena/rng.hpp"
#include "arena/taskgen.hpp"

// The four programmatic task families. Each instantiation is schema-driven:
// it picks collections/fields that satisfy the template's needs, renders a
// solution program and a verifier program, executes the solution for ground
// truth, and then must pass its own verifier or be discarded.

namespace arena {

const std::vector<std::string> kProgrammaticFamilies = {
    "aggregation", "conditional-branch", "cross-collection-join", "filtered-mutation"};

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Required string fields usable as filter pivots.
std::vector<std::string> pivot_fields(const CollectionSchema& schema) {
  std::vector<std::string> out;
  for (const FieldDesc& f : schema) {
    if (f.kind != Kind::String || !f.required) continue;
    if (f.name == "id" || ends_with(f.name, "_ref") || ends_with(f.name, "_id")) continue;
    out.push_back(f.name);
  }
  return out;
}

std::vector<std::string> numeric_fields(const CollectionSchema& schema) {
  std::vector<std::string> out;
  for (const FieldDesc& f : schema)
    if ((f.kind == Kind::Int || f.kind == Kind::Float) && f.required) out.push_back(f.name);
  return out;
}

std::vector<std::string> ref_fields(const CollectionSchema& schema) {
  std::vector<std::string> out;
  for (const FieldDesc& f : schema)
    if (f.kind == Kind::String && f.required && ends_with(f.name, "_ref")) out.push_back(f.name);
  return out;
}

// DSL literal text for a value; only the kinds the templates embed.
std::string lit(const Value& v) { return canonical_dump(v); }

std::string quoted(const std::string& s) { return canonical_dump(Value(s)); }

std::string render_pivot(const Value& v) {
  if (v.is_string()) return quoted(v.as_string());
  return canonical_dump(v);
}

std::vector<std::string> env_banned_names(const EnvironmentBundle& env) {
  std::vector<std::string> banned;
  for (const CheckedTool& t : env.tools) banned.push_back(t.sig().name);
  for (const auto& [coll, schema] : env.db.schema) banned.push_back(coll);
  return banned;
}

struct FamilyDraft {
  std::string solution_src;
  std::string verifier_src;
  std::string sentence;  // task-specific description body
  Value template_args;
};

// --- aggregation -----------------------------------------------------------

FamilyDraft draft_aggregation(const EnvironmentBundle& env, Rng& rng) {
  static const std::vector<std::string> ops = {"sum", "count", "avg"};
  const std::string op = rng.pick(ops);
  std::vector<std::string> eligible;
  for (const auto& [coll, schema] : env.db.schema) {
    if (env.db.collection(coll).empty()) continue;
    if (pivot_fields(schema).empty()) continue;
    if (op != "count" && numeric_fields(schema).empty()) continue;
    eligible.push_back(coll);
  }
  if (eligible.empty()) throw SynthesisError("no collection fits the aggregation template");
  const std::string coll = rng.pick(eligible);
  const CollectionSchema& schema = env.db.schema.at(coll);
  const std::string s_field = rng.pick(pivot_fields(schema));
  const ValueList& docs = env.db.collection(coll);
  const Value pivot =
      docs[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(docs.size())))]
          .as_object()
          .at(s_field);

  FamilyDraft d;
  const std::string cond = "x." + s_field + " == " + render_pivot(pivot);
  if (op == "count") {
    d.solution_src = "tool solve() -> int reads [" + coll + "] {\n  return count(db." + coll +
                     ", x, " + cond + ")\n}\n";
    d.verifier_src = "verifier check(answer) reads [" + coll + "] {\n  assert answer == count(db." +
                     coll + ", x, " + cond + "), \"answer: count mismatch\"\n}\n";
    d.sentence = "Count the records whose " + s_field + " is " + render_pivot(pivot) + ".";
  } else {
    const std::string f_field = rng.pick(numeric_fields(schema));
    const FieldDesc* fd = env.db.field_desc(coll, f_field);
    const bool int_sum = op == "sum" && fd->kind == Kind::Int;
    const std::string ret_kind = int_sum ? "int" : "float";
    const std::string zero = int_sum ? "0" : "0.0";
    const std::string agg = op + "(map(hits, x, x." + f_field + "))";
    d.solution_src = "tool solve() -> " + ret_kind + " reads [" + coll + "] {\n  let hits = filter(db." +
                     coll + ", x, " + cond + ")\n  if len(hits) == 0 {\n    return " + zero +
                     "\n  }\n  return " + agg + "\n}\n";
    d.verifier_src = "verifier check(answer) reads [" + coll + "] {\n  let hits = filter(db." + coll +
                     ", x, " + cond + ")\n  if len(hits) == 0 {\n    assert answer == " + zero +
                     ", \"answer: expected the empty-case value\"\n  }\n  if len(hits) > 0 {\n" +
                     "    assert answer == " + agg + ", \"answer: aggregate mismatch\"\n  }\n}\n";
    d.sentence = (op == "sum" ? "Add up the " + f_field + " of every record whose "
                              : "Work out the average " + f_field + " across records whose ") +
                 s_field + " is " + render_pivot(pivot) + ".";
    ValueObject ta;
    ta["field"] = Value(f_field);
    d.template_args = Value(std::move(ta));
  }
  ValueObject ta = d.template_args.is_object() ? d.template_args.as_object() : ValueObject{};
  ta["family"] = Value(std::string("aggregation"));
  ta["op"] = Value(op);
  ta["collection"] = Value(coll);
  ta["pivot_field"] = Value(s_field);
  ta["pivot"] = pivot;
  d.template_args = Value(std::move(ta));
  d.sentence += " Report just the number.";
  return d;
}

// --- conditional-branch ----------------------------------------------------

FamilyDraft draft_conditional(const EnvironmentBundle& env, Rng& rng) {
  std::vector<std::string> eligible;
  for (const auto& [coll, schema] : env.db.schema) {
    if (env.db.collection(coll).empty()) continue;
    if (!pivot_fields(schema).empty()) eligible.push_back(coll);
  }
  if (eligible.empty()) throw SynthesisError("no collection fits the conditional template");
  const std::string coll = rng.pick(eligible);
  const std::string s_field = rng.pick(pivot_fields(env.db.schema.at(coll)));
  const ValueList& docs = env.db.collection(coll);
  Value pivot;
  if (rng.bernoulli(0.3)) {
    pivot = Value(std::string("none_of_these"));  // deliberately unmatched branch
  } else {
    pivot = docs[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(docs.size())))]
                .as_object()
                .at(s_field);
  }
  const std::int64_t threshold = rng.range(1, 3);

  const std::string cond = "x." + s_field + " == " + render_pivot(pivot);
  const std::string t = std::to_string(threshold);
  FamilyDraft d;
  d.solution_src = "tool solve() -> int reads [" + coll + "] {\n  let n = count(db." + coll +
                   ", x, " + cond + ")\n  if n >= " + t + " {\n    return n\n  }\n  return 0\n}\n";
  d.verifier_src = "verifier check(answer) reads [" + coll + "] {\n  let n = count(db." + coll +
                   ", x, " + cond + ")\n  if n >= " + t +
                   " {\n    assert answer == n, \"answer: expected the matching count\"\n  }\n  if n < " +
                   t + " {\n    assert answer == 0, \"answer: expected zero under the cutoff\"\n  }\n}\n";
  d.sentence = "Count the records whose " + s_field + " is " + render_pivot(pivot) +
               ". If at least " + t + " match, report that count; otherwise report 0.";
  ValueObject ta;
  ta["family"] = Value(std::string("conditional-branch"));
  ta["collection"] = Value(coll);
  ta["pivot_field"] = Value(s_field);
  ta["pivot"] = pivot;
  ta["threshold"] = Value(threshold);
  d.template_args = Value(std::move(ta));
  return d;
}

// --- cross-collection-join -------------------------------------------------

FamilyDraft draft_join(const EnvironmentBundle& env, Rng& rng) {
  struct JoinPick {
    std::string child, ref, numeric, parent;
  };
  std::vector<JoinPick> picks;
  for (const auto& [coll, schema] : env.db.schema) {
    if (env.db.collection(coll).empty()) continue;
    std::vector<std::string> refs = ref_fields(schema);
    std::vector<std::string> nums = numeric_fields(schema);
    if (refs.empty() || nums.empty()) continue;
    for (const std::string& r : refs) {
      // Resolve the parent collection empirically: the collection holding the
      // document the first reference points at.
      const Value& rv = env.db.collection(coll)[0].as_object().at(r);
      if (!rv.is_string()) continue;
      for (const auto& [parent, pdocs] : env.db.collections) {
        if (parent == coll) continue;
        if (env.db.find_doc(parent, rv.as_string())) {
          for (const std::string& n : nums) picks.push_back({coll, r, n, parent});
          break;
        }
      }
    }
  }
  if (picks.empty()) throw SynthesisError("no collection pair fits the join template");
  const JoinPick pick = picks[static_cast<std::size_t>(
      rng.bounded(static_cast<std::int64_t>(picks.size())))];
  const ValueList& parents = env.db.collection(pick.parent);
  const std::string pid =
      parents[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(parents.size())))]
          .as_object()
          .at("id")
          .as_string();

  const std::string cond = "x." + pick.ref + " == " + quoted(pid);
  FamilyDraft d;
  d.solution_src = "tool solve() -> object reads [" + pick.child + "] {\n  let kids = filter(db." +
                   pick.child + ", x, " + cond +
                   ")\n  return {\"matches\": len(kids), \"total\": sum(map(kids, x, x." +
                   pick.numeric + "))}\n}\n";
  d.verifier_src = "verifier check(answer) reads [" + pick.child +
                   "] {\n  let kids = filter(db." + pick.child + ", x, " + cond +
                   ")\n  assert answer.matches == len(kids), \"answer: match count mismatch\"\n" +
                   "  assert answer.total == sum(map(kids, x, x." + pick.numeric +
                   ")), \"answer: total mismatch\"\n}\n";
  d.sentence = "Look at the entry " + pid + ". Report how many records reference it and their combined " +
               pick.numeric + ", as an object with fields \"matches\" and \"total\".";
  ValueObject ta;
  ta["family"] = Value(std::string("cross-collection-join"));
  ta["collection"] = Value(pick.child);
  ta["ref_field"] = Value(pick.ref);
  ta["numeric_field"] = Value(pick.numeric);
  ta["parent_id"] = Value(pid);
  d.template_args = Value(std::move(ta));
  return d;
}

// --- filtered-mutation -----------------------------------------------------

FamilyDraft draft_filtered_mutation(const EnvironmentBundle& env, const ThemeTemplate& theme,
                                    Rng& rng) {
  if (theme.mutations.empty())
    throw SynthesisError("theme has no mutation metadata for the filtered-mutation template");
  const MutationSpec& m = theme.mutations[static_cast<std::size_t>(
      rng.bounded(static_cast<std::int64_t>(theme.mutations.size())))];
  if (!env.db.has_collection(m.collection) || !env.find_tool(m.tool))
    throw SynthesisError("mutation metadata does not match the environment");
  const CollectionSchema& schema = env.db.schema.at(m.collection);
  std::vector<std::string> pivots = pivot_fields(schema);
  if (pivots.empty() || env.db.collection(m.collection).empty())
    throw SynthesisError("no pivot field for the filtered-mutation template");
  const std::string s_field = rng.pick(pivots);
  const ValueList& docs = env.db.collection(m.collection);
  const Value pivot =
      docs[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(docs.size())))]
          .as_object()
          .at(s_field);

  ValueList target_ids;
  for (const Value& doc : docs)
    if (doc.as_object().at(s_field) == pivot) target_ids.push_back(doc.as_object().at("id"));
  if (target_ids.empty() || target_ids.size() > 12)
    throw SynthesisError("filtered-mutation target set size unsuitable");

  const std::string cond = "x." + s_field + " == " + render_pivot(pivot);
  std::string patch = "{";
  std::string mismatch;
  std::string change_desc;
  bool first = true;
  for (const auto& [f, v] : m.sets) {
    if (!first) {
      patch += ", ";
      mismatch += " || ";
      change_desc += " and ";
    }
    first = false;
    patch += quoted(f) + ": " + lit(v);
    mismatch += "x." + f + " != " + lit(v);
    change_desc += f + " becomes " + render_pivot(v);
  }
  patch += "}";
  if (m.sets.size() > 1) mismatch = "(" + mismatch + ")";

  FamilyDraft d;
  d.solution_src = "tool solve() -> int reads [" + m.collection + "] writes [" + m.collection +
                   "] {\n  update(" + m.collection + ", x, " + cond + ", " + patch +
                   ")\n  return count(db." + m.collection + ", x, " + cond + ")\n}\n";
  d.verifier_src = "verifier check(answer) reads [" + m.collection +
                   "] {\n  assert answer == count(db." + m.collection + ", x, " + cond +
                   "), \"answer: remaining count mismatch\"\n  let bad = count(db." + m.collection +
                   ", x, " + cond + " && " + mismatch +
                   ")\n  assert bad == 0, \"state: matching records left unpatched\"\n}\n";
  d.sentence = "For every record whose " + s_field + " is " + render_pivot(pivot) +
               ", apply the standard update so " + change_desc +
               ". When done, report how many records currently have " + s_field + " equal to " +
               render_pivot(pivot) + ".";
  ValueObject ta;
  ta["family"] = Value(std::string("filtered-mutation"));
  ta["collection"] = Value(m.collection);
  ta["pivot_field"] = Value(s_field);
  ta["pivot"] = pivot;
  ta["tool"] = Value(m.tool);
  ta["id_param"] = Value(m.id_param);
  ta["target_ids"] = Value(std::move(target_ids));
  d.template_args = Value(std::move(ta));
  return d;
}

}  // namespace

TaskRecord generate_programmatic_task(const std::string& template_id,
                                      const EnvironmentBundle& env, const ThemeTemplate& theme,
                                      const DifficultyKnobs& knobs, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "prog"));
  FamilyDraft d;
  if (template_id == "aggregation") d = draft_aggregation(env, rng);
  else if (template_id == "conditional-branch") d = draft_conditional(env, rng);
  else if (template_id == "cross-collection-join") d = draft_join(env, rng);
  else if (template_id == "filtered-mutation") d = draft_filtered_mutation(env, theme, rng);
  else throw SynthesisError("unknown programmatic template '" + template_id + "'");

  // Parse and check both programs, then run the solution and hold its output
  // against the task's own verifier. Any failure discards the instantiation.
  ProgramPtr solve, verify;
  try {
    solve = parse_program(d.solution_src);
    check_program(*solve, &env.db);
    verify = parse_program(d.verifier_src);
    check_program(*verify, &env.db);
  } catch (const Error& e) {
    throw SynthesisError(std::string("template program invalid: ") + e.what());
  }
  EvalOutcome out = evaluate_program(*solve, env.db, {});
  if (!out.ok)
    throw SynthesisError("solution program failed: " + out.error.code + ": " + out.error.message);
  ValueObject vargs;
  vargs[verify->sig.params.at(0).name] = out.value;
  EvalOutcome vcheck = evaluate_program(*verify, out.db_after, vargs);
  if (!vcheck.ok)
    throw SynthesisError("self-verification failed: " + vcheck.error.code + ": " +
                         vcheck.error.message);

  TaskRecord t;
  t.task_id = env.env_id + "-" + template_id + "-s" + std::to_string(seed);
  t.env_id = env.env_id;
  t.kind = "programmatic";
  const DescriptionBank& bank = theme.bank;
  if (bank.openers.empty()) throw SynthesisError("theme '" + theme.theme + "' has no openers");
  const std::vector<std::string>& openers =
      (knobs.obfuscation_level >= 2 && !bank.vague_openers.empty()) ? bank.vague_openers
                                                                    : bank.openers;
  t.description = rng.pick(openers) + " " + d.sentence;
  if (knobs.obfuscation_level >= 1) {
    std::vector<std::string> banned = env_banned_names(env);
    t.description = scrub_description(t.description, banned);
    if (!description_clean(t.description, banned))
      throw SynthesisError("description still leaks tool or collection names after scrubbing");
  }
  t.ground_truth = out.value;
  t.verifier_source = print_program(*verify);
  t.solution_source = print_program(*solve);
  t.template_args = d.template_args;
  t.expected_db_digest = snapshot_database(out.db_after).digest;
  t.mutating = !out.writes.empty();
  t.difficulty = knobs;
  t.seed = seed;
  t.template_id = template_id;
  return t;
}

}  // namespace arena
