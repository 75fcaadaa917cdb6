#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arena/database.hpp"
#include "arena/dsl.hpp"
#include "arena/rng.hpp"

// Procedural environment generation: theme templates instantiate databases and
// toolsets, databases grow through repeated complexification rounds, and the
// resulting ecosystem is organized by Ward clustering over feature vectors.

namespace arena {

// ---------------------------------------------------------------------------
// Theme templates

// Deterministic per-field value generator.
struct FieldGen {
  // one of: choice, int_range, float_range, word_pair, date, bool_p, fk,
  // list_choice, const
  std::string kind;
  std::vector<Value> choices;  // choice / word_pair / list_choice pools
  std::int64_t lo = 0, hi = 0;
  double flo = 0.0, fhi = 0.0;
  int decimals = 2;
  double p = 0.5;
  std::string fk_collection;
  Value const_value;

  Value to_value() const;
  static FieldGen from_value(const Value& v);
};

struct FieldSpec {
  std::string name;
  Kind kind = Kind::Null;
  bool required = true;
  FieldGen gen;

  Value to_value() const;
  static FieldSpec from_value(const Value& v);
};

struct CollectionSpec {
  std::string name;
  std::string id_prefix;  // document ids are "<prefix><ordinal>"
  std::int64_t min_docs = 1, max_docs = 1;
  std::vector<FieldSpec> fields;  // 'id' is implicit

  Value to_value() const;
  static CollectionSpec from_value(const Value& v);
};

// How to sample one argument for unit cases and task grounding.
struct ArgSampler {
  // one of: doc_id, choice, int_range, float_range
  std::string kind;
  std::string collection;  // doc_id: sample an existing id from here
  std::vector<Value> choices;
  std::int64_t lo = 0, hi = 0;
  double flo = 0.0, fhi = 0.0;
  int decimals = 2;

  Value sample(Rng& rng, const Database& db) const;
  Value to_value() const;
  static ArgSampler from_value(const Value& v);
};

// Metadata for mutation tools, used by programmatic task families.
struct MutationSpec {
  std::string tool;
  std::string collection;
  std::string id_param;               // parameter carrying the target doc id
  std::map<std::string, Value> sets;  // constant fields the tool writes

  Value to_value() const;
  static MutationSpec from_value(const Value& v);
};

struct ToolSpec {
  std::string source;  // tool-language program text
  std::map<std::string, ArgSampler> samplers;
  std::string intent;          // description phrase; {param} slots
  std::string pronoun_intent;  // variant when the key argument is a prior result
  int unit_cases = 3;

  Value to_value() const;
  static ToolSpec from_value(const Value& v);
};

struct DescriptionBank {
  std::vector<std::string> openers;
  std::vector<std::string> vague_openers;  // heavier obfuscation
  std::vector<std::string> connectors;

  Value to_value() const;
  static DescriptionBank from_value(const Value& v);
};

struct ThemeTemplate {
  std::string theme;
  std::vector<CollectionSpec> collections;  // generated in order (FK targets first)
  std::vector<ToolSpec> tools;
  std::vector<MutationSpec> mutations;
  DescriptionBank bank;
  std::vector<double> feature_vector;  // fixed-length theme descriptor block

  Value to_value() const;
  static ThemeTemplate from_value(const Value& v);
};

// The six built-in themes; `themes/<name>.json` ships their serialization.
const std::vector<ThemeTemplate>& builtin_themes();
const ThemeTemplate& builtin_theme(const std::string& name);

// ---------------------------------------------------------------------------
// Environment bundles

struct EnvironmentBundle {
  std::string env_id;
  std::string theme;
  std::string first_tier;   // empty until a taxonomy assigns it
  std::string second_tier;  // empty until a taxonomy assigns it
  Database db;
  std::vector<CheckedTool> tools;
  std::vector<ToolReport> reports;

  const CheckedTool* find_tool(const std::string& name) const;

  Value to_value() const;
  // Re-parses and re-checks tool sources; throws on any invalid payload.
  static EnvironmentBundle from_value(const Value& v);
};

// Deterministic: identical (template, seed) yields an identical bundle.
// Throws EnvironmentRejected when no tool survives the retention filter.
EnvironmentBundle generate_environment(const ThemeTemplate& tmpl, std::uint64_t seed);

// Regenerates every tool's unit cases against the bundle's current database
// (needed after complexification) and re-runs the retention filter.
void refresh_unit_cases(EnvironmentBundle& bundle, const ThemeTemplate& tmpl, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Complexification

struct ComplexifyKnobs {
  std::int64_t rounds = 0;
  std::int64_t add_records = 0;
  std::int64_t add_fields = 0;
  double add_linked_collection_prob = 0.0;

  Value to_value() const;
  static ComplexifyKnobs from_value(const Value& v);
};

// One growth round: appends records, adds optional fields (populated on every
// document), and possibly attaches a linked collection with a reference field.
// Monotone: existing ids and their original field values survive untouched.
Database complexify_round(const Database& db, const ComplexifyKnobs& knobs, std::uint64_t seed);

// knobs.rounds applications of complexify_round under split seeds.
Database complexify_database(const Database& db, const ComplexifyKnobs& knobs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Feature vectors and the taxonomy

// Fixed layout: [theme one-hot over the built-in themes][collection count,
// tool count, writer fraction, avg fields per collection, avg params per tool,
// document count / 32, schema depth avg, strong-chain potential].
std::vector<double> environment_features(const EnvironmentBundle& bundle);

struct WardMerge {
  std::size_t a = 0, b = 0;  // cluster representatives (smallest member index)
  double cost = 0.0;
};

// Full agglomerative merge sequence under Ward's criterion (direct increase in
// within-cluster sum of squares). Ties break on the lexicographically smallest
// (label(a), label(b)) pair, labels being each cluster's smallest member label.
std::vector<WardMerge> ward_linkage(const std::vector<std::vector<double>>& points,
                                    const std::vector<std::string>& labels);

struct Taxonomy {
  std::map<std::string, std::vector<std::string>> first_tier;
  std::map<std::string, std::vector<std::string>> second_tier;
  // env_id -> (first-tier label, second-tier label)
  std::map<std::string, std::pair<std::string, std::string>> assignment;
  bool degenerate = false;

  Value to_value() const;
  static Taxonomy from_value(const Value& v);
};

// Ward clustering cut at k2, then continued to k1 (k1 <= k2). Cluster labels
// are each cluster's smallest member env_id. All-identical vectors collapse to
// one cluster at both tiers with the degenerate flag set.
Taxonomy build_taxonomy(const std::vector<std::pair<std::string, std::vector<double>>>& features,
                        std::size_t k2, std::size_t k1);

}  // namespace arena
