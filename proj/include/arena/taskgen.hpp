#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arena/forge.hpp"

// Task synthesis: a dependency graph over an environment's tools, weighted
// random walks over it, argument grounding and chain refinement, ground-truth
// derivation by sandboxed execution, rubric generation, and programmatic
// template tasks carrying verifier programs.

namespace arena {

// ---------------------------------------------------------------------------
// Tool graph

enum class EdgeKind { Strong, Weak, Independent };

const char* edge_kind_name(EdgeKind k);

struct ToolEdge {
  std::string src, dst;
  EdgeKind kind = EdgeKind::Independent;
  int weight = 1;  // strong 3, weak 2, independent 1

  bool operator==(const ToolEdge&) const = default;
};

struct ToolGraph {
  std::vector<std::string> nodes;
  // Strong edges are directed; weak/independent edges are stored once per
  // unordered pair and usable in both directions.
  std::vector<ToolEdge> edges;

  bool has_incoming_strong(const std::string& node) const;
  // Nodes with no incoming strong edge; falls back to every node when none.
  std::vector<std::string> start_nodes() const;
  // (neighbor, effective edge) pairs reachable from `node` in one step.
  std::vector<std::pair<std::string, const ToolEdge*>> successors(const std::string& node) const;

  Value to_value() const;
  static ToolGraph from_value(const Value& v);
};

// Classifies every tool pair. Strong src->dst: some required parameter of dst
// matches a statically known return field of src by name and kind, and that
// field name appears in no collection schema (the value is producible only by
// tools). Weak: such a match exists but the name is also a database field, or
// the two tools share a parameter name that is a database field. Independent
// otherwise. Throws ValueError on an empty toolset.
ToolGraph build_tool_graph(const std::vector<CheckedTool>& tools, const Database& db);

struct DifficultyKnobs {
  std::int64_t max_walk_len = 3;
  double weak_indep_bias = 1.0;  // multiplier on weak/independent weights
  int obfuscation_level = 0;     // 0,1,2

  Value to_value() const;
  static DifficultyKnobs from_value(const Value& v);
};

DifficultyKnobs set_difficulty(const DifficultyKnobs& base, int level);

// Starts uniformly among start_nodes() (weighted by boost when present) and
// extends with probability proportional to weight x bias (bias applies to
// weak/independent edges) x boost(dst). Prefers unvisited successors; a node
// is revisited only when the current node has no unvisited successor, and the
// walk stops when it has no successors at all. Length <= knobs.max_walk_len.
std::vector<std::string> sample_tool_walk(const ToolGraph& g, const DifficultyKnobs& knobs,
                                          std::uint64_t seed,
                                          const std::map<std::string, double>& boost = {});

// ---------------------------------------------------------------------------
// Grounded chains

struct ArgProvenance {
  enum class Source { PriorOutput, DatabaseValue, Constant };
  Source source = Source::Constant;
  int step = -1;      // PriorOutput: producing step index
  std::string path;   // PriorOutput: field in that output; DatabaseValue: "coll.idx.field"
  Value value;        // concrete grounded value

  Value to_value() const;
  static ArgProvenance from_value(const Value& v);
};

struct ChainStep {
  std::string tool;
  ValueObject args;
  std::map<std::string, ArgProvenance> provenance;

  Value to_value() const;
  static ChainStep from_value(const Value& v);
};

struct GroundedChain {
  std::vector<ChainStep> steps;

  Value to_value() const;
  static GroundedChain from_value(const Value& v);
};

struct ChainRejected : Error {
  using Error::Error;
};

// Grounds every parameter (prior output -> database field match -> "<stem>_id"
// id rule -> omit optional), trial-executing each step, then prunes steps
// whose return is unused downstream and whose execution wrote nothing (the
// final step always stays). Throws ChainRejected when a parameter cannot be
// grounded or a trial execution fails.
GroundedChain ground_and_refine_chain(const std::vector<std::string>& walk,
                                      const EnvironmentBundle& env, std::uint64_t seed);

struct GroundTruth {
  Value answer;  // final step's return value
  std::vector<std::pair<Value, std::vector<WriteOp>>> trace;
  Snapshot final_db;
};

// Re-executes the chain from a fresh snapshot. Throws ChainRejected if any
// step fails.
GroundTruth derive_ground_truth(const GroundedChain& chain, const EnvironmentBundle& env);

// ---------------------------------------------------------------------------
// Rubrics

struct RubricItem {
  enum class Check { FieldPresent, SchemaMatch, ValueEquals, NumericClose };
  Check check = Check::FieldPresent;
  std::string path;  // top-level field, or "" for a scalar answer
  Kind kind = Kind::Null;  // SchemaMatch
  Value expect;            // ValueEquals / NumericClose
  double rel_tol = 1e-6, abs_tol = 1e-9;

  Value to_value() const;
  static RubricItem from_value(const Value& v);
};

struct Rubric {
  std::vector<RubricItem> criteria;
  double threshold = 1.0;  // reward 1 iff mean(criteria) >= threshold

  Value to_value() const;
  static Rubric from_value(const Value& v);
};

// field_present + schema_match per top-level field, plus value_equals
// (numeric_close for floats) on each; a scalar answer gets path "" criteria.
Rubric rubric_for_answer(const Value& answer);

// ---------------------------------------------------------------------------
// Task records

struct TaskRecord {
  std::string task_id;
  std::string env_id;
  std::string kind;  // "graph" | "programmatic"
  std::string description;
  Value ground_truth;
  Rubric rubric;                 // graph tasks
  std::string verifier_source;   // programmatic tasks
  std::string solution_source;   // programmatic tasks
  GroundedChain chain;           // graph tasks: provenance for replay
  Value template_args;           // programmatic tasks: instantiation record
  std::uint64_t expected_db_digest = 0;  // digest of the ground-truth final db
  bool mutating = false;         // ground-truth execution wrote something
  DifficultyKnobs difficulty;
  std::uint64_t seed = 0;
  std::string template_id;  // "walk" or the programmatic family name

  Value to_value() const;
  static TaskRecord from_value(const Value& v);
};

struct SynthesisError : Error {
  using Error::Error;
};

// Whole-token, case-insensitive replacement of banned names with "that".
std::string scrub_description(const std::string& text, const std::vector<std::string>& banned);
// True when no banned name survives as a whole token.
bool description_clean(const std::string& text, const std::vector<std::string>& banned);

// Renders the description from the theme's bank, builds the rubric from a*,
// and (at obfuscation >= 1) scrubs and re-checks tool/collection names.
TaskRecord generate_graph_task(const GroundedChain& chain, const GroundTruth& truth,
                               const EnvironmentBundle& env, const ThemeTemplate& theme,
                               const DifficultyKnobs& knobs, std::uint64_t seed);

extern const std::vector<std::string> kProgrammaticFamilies;  // the four template ids

// Instantiates one of {aggregation, conditional-branch, cross-collection-join,
// filtered-mutation}; executes the solution for ground truth and verifies it
// with its own verifier, throwing SynthesisError when instantiation or
// self-verification fails (callers resample).
TaskRecord generate_programmatic_task(const std::string& template_id,
                                      const EnvironmentBundle& env, const ThemeTemplate& theme,
                                      const DifficultyKnobs& knobs, std::uint64_t seed);

// Convenience batch synthesis: n_graph walk tasks and n_prog programmatic
// tasks under split seeds, resampling rejected instantiations (bounded
// attempts). task_id = id_prefix + env_id + "-<tag><ordinal>".
std::vector<TaskRecord> synthesize_tasks(const EnvironmentBundle& env, const ThemeTemplate& theme,
                                         const DifficultyKnobs& knobs, int n_graph, int n_prog,
                                         std::uint64_t seed, const std::string& id_prefix = "",
                                         const std::map<std::string, double>& boost = {});

}  // namespace arena
