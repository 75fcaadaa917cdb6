#include "arena/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "arena/dsl.hpp"
#include "arena/rng.hpp"

namespace arena {

namespace {

const Value& need(const ValueObject& o, const std::string& key) {
  auto it = o.find(key);
  if (it == o.end()) throw ValueError("missing field '" + key + "'");
  return it->second;
}

std::string u64_str(std::uint64_t x) { return std::to_string(x); }

std::uint64_t str_u64(const Value& v) {
  if (v.is_int()) return static_cast<std::uint64_t>(v.as_int());
  return std::stoull(v.as_string());
}

// True when some collection schema declares a field with this name (any kind).
bool name_in_schema(const Database& db, const std::string& name) {
  for (const auto& [coll, schema] : db.schema)
    for (const FieldDesc& f : schema)
      if (f.name == name) return true;
  return false;
}

bool kinds_compatible(bool is_any, Kind want, Kind got) { return is_any || want == got; }

}  // namespace

// ---------------------------------------------------------------------------
// Tool graph

const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Strong: return "strong";
    case EdgeKind::Weak: return "weak";
    case EdgeKind::Independent: return "independent";
  }
  return "independent";
}

static EdgeKind edge_kind_from_name(const std::string& s) {
  if (s == "strong") return EdgeKind::Strong;
  if (s == "weak") return EdgeKind::Weak;
  if (s == "independent") return EdgeKind::Independent;
  throw ValueError("unknown edge kind '" + s + "'");
}

bool ToolGraph::has_incoming_strong(const std::string& node) const {
  for (const ToolEdge& e : edges)
    if (e.kind == EdgeKind::Strong && e.dst == node) return true;
  return false;
}

std::vector<std::string> ToolGraph::start_nodes() const {
  std::vector<std::string> out;
  for (const std::string& n : nodes)
    if (!has_incoming_strong(n)) out.push_back(n);
  if (out.empty()) out = nodes;
  return out;
}

std::vector<std::pair<std::string, const ToolEdge*>> ToolGraph::successors(
    const std::string& node) const {
  std::vector<std::pair<std::string, const ToolEdge*>> out;
  for (const ToolEdge& e : edges) {
    if (e.kind == EdgeKind::Strong) {
      if (e.src == node) out.emplace_back(e.dst, &e);
    } else {
      if (e.src == node) out.emplace_back(e.dst, &e);
      else if (e.dst == node) out.emplace_back(e.src, &e);
    }
  }
  return out;
}

Value ToolGraph::to_value() const {
  ValueObject o;
  ValueList ns;
  for (const std::string& n : nodes) ns.emplace_back(n);
  o["nodes"] = Value(std::move(ns));
  ValueList es;
  for (const ToolEdge& e : edges) {
    ValueObject eo;
    eo["src"] = Value(e.src);
    eo["dst"] = Value(e.dst);
    eo["kind"] = Value(edge_kind_name(e.kind));
    eo["weight"] = Value(static_cast<std::int64_t>(e.weight));
    es.emplace_back(std::move(eo));
  }
  o["edges"] = Value(std::move(es));
  return Value(std::move(o));
}

ToolGraph ToolGraph::from_value(const Value& v) {
  ToolGraph g;
  const ValueObject& o = v.as_object();
  for (const Value& n : need(o, "nodes").as_list()) g.nodes.push_back(n.as_string());
  for (const Value& ev : need(o, "edges").as_list()) {
    const ValueObject& eo = ev.as_object();
    ToolEdge e;
    e.src = need(eo, "src").as_string();
    e.dst = need(eo, "dst").as_string();
    e.kind = edge_kind_from_name(need(eo, "kind").as_string());
    e.weight = static_cast<int>(need(eo, "weight").as_int());
    g.edges.push_back(std::move(e));
  }
  return g;
}

namespace {

// Strong i->j: a required parameter of j is fed by a statically known return
// field of i whose name exists in no collection schema.
bool strong_edge(const CheckedTool& a, const CheckedTool& b, const Database& db) {
  if (!a.shape.known || !a.shape.is_object) return false;
  for (const ParamSig& p : b.sig().params) {
    if (!p.required) continue;
    auto it = a.shape.fields.find(p.name);
    if (it == a.shape.fields.end()) continue;
    if (!kinds_compatible(p.is_any, p.kind, it->second)) continue;
    if (!name_in_schema(db, p.name)) return true;
  }
  return false;
}

// Weak: the same kind of match exists but the field name is also a database
// field, or the two tools share a parameter name that is a database field.
bool weak_edge(const CheckedTool& a, const CheckedTool& b, const Database& db) {
  auto field_feeds = [&](const CheckedTool& x, const CheckedTool& y) {
    if (!x.shape.known || !x.shape.is_object) return false;
    for (const ParamSig& p : y.sig().params) {
      if (!p.required) continue;
      auto it = x.shape.fields.find(p.name);
      if (it == x.shape.fields.end()) continue;
      if (!kinds_compatible(p.is_any, p.kind, it->second)) continue;
      if (name_in_schema(db, p.name)) return true;
    }
    return false;
  };
  if (field_feeds(a, b) || field_feeds(b, a)) return true;
  for (const ParamSig& p : a.sig().params)
    for (const ParamSig& q : b.sig().params)
      if (p.name == q.name && name_in_schema(db, p.name)) return true;
  return false;
}

}  // namespace

ToolGraph build_tool_graph(const std::vector<CheckedTool>& tools, const Database& db) {
  if (tools.empty()) throw ValueError("cannot build a tool graph from an empty toolset");
  ToolGraph g;
  for (const CheckedTool& t : tools) g.nodes.push_back(t.sig().name);
  for (std::size_t i = 0; i < tools.size(); ++i) {
    for (std::size_t j = i + 1; j < tools.size(); ++j) {
      bool sij = strong_edge(tools[i], tools[j], db);
      bool sji = strong_edge(tools[j], tools[i], db);
      if (sij) g.edges.push_back({g.nodes[i], g.nodes[j], EdgeKind::Strong, 3});
      if (sji) g.edges.push_back({g.nodes[j], g.nodes[i], EdgeKind::Strong, 3});
      if (!sij && !sji) {
        if (weak_edge(tools[i], tools[j], db))
          g.edges.push_back({g.nodes[i], g.nodes[j], EdgeKind::Weak, 2});
        else
          g.edges.push_back({g.nodes[i], g.nodes[j], EdgeKind::Independent, 1});
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Difficulty

Value DifficultyKnobs::to_value() const {
  ValueObject o;
  o["max_walk_len"] = Value(max_walk_len);
  o["weak_indep_bias"] = Value(weak_indep_bias);
  o["obfuscation_level"] = Value(static_cast<std::int64_t>(obfuscation_level));
  return Value(std::move(o));
}

DifficultyKnobs DifficultyKnobs::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  DifficultyKnobs k;
  k.max_walk_len = need(o, "max_walk_len").as_int();
  k.weak_indep_bias = need(o, "weak_indep_bias").as_number();
  k.obfuscation_level = static_cast<int>(need(o, "obfuscation_level").as_int());
  return k;
}

DifficultyKnobs set_difficulty(const DifficultyKnobs& base, int level) {
  if (level < 0) throw ValueError("difficulty level must be non-negative");
  DifficultyKnobs k = base;
  k.max_walk_len = base.max_walk_len + 2 * level;
  k.weak_indep_bias = 1.0 + level;
  k.obfuscation_level = std::min(level, 2);
  return k;
}

// ---------------------------------------------------------------------------
// Walks

std::vector<std::string> sample_tool_walk(const ToolGraph& g, const DifficultyKnobs& knobs,
                                          std::uint64_t seed,
                                          const std::map<std::string, double>& boost) {
  if (g.nodes.empty()) throw ValueError("cannot walk an empty graph");
  if (knobs.max_walk_len < 1) throw ValueError("max_walk_len must be at least 1");
  auto boost_of = [&](const std::string& n) {
    auto it = boost.find(n);
    return it == boost.end() ? 1.0 : it->second;
  };
  Rng rng(seed);
  std::vector<std::string> starts = g.start_nodes();
  std::vector<double> sw;
  sw.reserve(starts.size());
  for (const std::string& n : starts) sw.push_back(boost_of(n));
  std::vector<std::string> walk{starts[rng.weighted(sw)]};
  std::set<std::string> visited{walk.back()};
  while (static_cast<std::int64_t>(walk.size()) < knobs.max_walk_len) {
    auto succ = g.successors(walk.back());
    std::vector<std::string> cand;
    std::vector<double> w;
    auto gather = [&](bool unvisited_only) {
      cand.clear();
      w.clear();
      for (const auto& [n, e] : succ) {
        if (unvisited_only && visited.count(n)) continue;
        double bias = e->kind == EdgeKind::Strong ? 1.0 : knobs.weak_indep_bias;
        w.push_back(e->weight * bias * boost_of(n));
        cand.push_back(n);
      }
    };
    gather(true);
    if (cand.empty()) gather(false);  // revisit only when nothing new is reachable
    if (cand.empty()) break;
    const std::string& next = cand[rng.weighted(w)];
    visited.insert(next);
    walk.push_back(next);
  }
  return walk;
}

// ---------------------------------------------------------------------------
// Grounded chains

namespace {

const char* source_name(ArgProvenance::Source s) {
  switch (s) {
    case ArgProvenance::Source::PriorOutput: return "prior_output";
    case ArgProvenance::Source::DatabaseValue: return "database";
    case ArgProvenance::Source::Constant: return "constant";
  }
  return "constant";
}

ArgProvenance::Source source_from_name(const std::string& s) {
  if (s == "prior_output") return ArgProvenance::Source::PriorOutput;
  if (s == "database") return ArgProvenance::Source::DatabaseValue;
  if (s == "constant") return ArgProvenance::Source::Constant;
  throw ValueError("unknown provenance source '" + s + "'");
}

}  // namespace

Value ArgProvenance::to_value() const {
  ValueObject o;
  o["source"] = Value(source_name(source));
  o["step"] = Value(static_cast<std::int64_t>(step));
  o["path"] = Value(path);
  o["value"] = value;
  return Value(std::move(o));
}

ArgProvenance ArgProvenance::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  ArgProvenance p;
  p.source = source_from_name(need(o, "source").as_string());
  p.step = static_cast<int>(need(o, "step").as_int());
  p.path = need(o, "path").as_string();
  p.value = need(o, "value");
  return p;
}

Value ChainStep::to_value() const {
  ValueObject o;
  o["tool"] = Value(tool);
  o["args"] = Value(args);
  ValueObject pv;
  for (const auto& [name, prov] : provenance) pv[name] = prov.to_value();
  o["provenance"] = Value(std::move(pv));
  return Value(std::move(o));
}

ChainStep ChainStep::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  ChainStep s;
  s.tool = need(o, "tool").as_string();
  s.args = need(o, "args").as_object();
  for (const auto& [name, pv] : need(o, "provenance").as_object())
    s.provenance[name] = ArgProvenance::from_value(pv);
  return s;
}

Value GroundedChain::to_value() const {
  ValueList l;
  for (const ChainStep& s : steps) l.push_back(s.to_value());
  ValueObject o;
  o["steps"] = Value(std::move(l));
  return Value(std::move(o));
}

GroundedChain GroundedChain::from_value(const Value& v) {
  GroundedChain c;
  for (const Value& sv : need(v.as_object(), "steps").as_list())
    c.steps.push_back(ChainStep::from_value(sv));
  return c;
}

namespace {

struct Grounding {
  bool found = false;
  ArgProvenance prov;
};

// Prior outputs first (most recent), then database values of matching kind,
// then the "<stem>_id" document-id rule.
Grounding ground_param(const ParamSig& p, const std::vector<Value>& outputs, const Database& db,
                       Rng& rng) {
  Grounding g;
  for (int k = static_cast<int>(outputs.size()) - 1; k >= 0; --k) {
    if (!outputs[k].is_object()) continue;
    const ValueObject& o = outputs[k].as_object();
    auto it = o.find(p.name);
    if (it == o.end()) continue;
    if (!kinds_compatible(p.is_any, p.kind, it->second.kind())) continue;
    g.found = true;
    g.prov = {ArgProvenance::Source::PriorOutput, k, p.name, it->second};
    return g;
  }
  struct Hit {
    std::string coll;
    std::size_t idx;
    Value value;
  };
  std::vector<Hit> hits;
  for (const auto& [coll, schema] : db.schema) {
    const FieldDesc* fd = nullptr;
    for (const FieldDesc& f : schema)
      if (f.name == p.name && kinds_compatible(p.is_any, p.kind, f.kind)) fd = &f;
    if (!fd) continue;
    const ValueList& docs = db.collection(coll);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const ValueObject& doc = docs[i].as_object();
      auto it = doc.find(p.name);
      if (it == doc.end() || it->second.is_null()) continue;
      hits.push_back({coll, i, it->second});
    }
  }
  if (!hits.empty()) {
    const Hit& h = hits[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(hits.size())))];
    g.found = true;
    g.prov = {ArgProvenance::Source::DatabaseValue,
              -1,
              h.coll + "." + std::to_string(h.idx) + "." + p.name,
              h.value};
    return g;
  }
  const std::string suffix = "_id";
  if (p.name.size() > suffix.size() &&
      p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) == 0 &&
      (p.is_any || p.kind == Kind::String)) {
    std::string stem = p.name.substr(0, p.name.size() - suffix.size());
    std::string coll;
    if (db.has_collection(stem)) coll = stem;
    else if (db.has_collection(stem + "s")) coll = stem + "s";
    if (!coll.empty() && !db.collection(coll).empty()) {
      std::size_t idx =
          static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(db.collection(coll).size())));
      const Value& id = db.collection(coll)[idx].as_object().at("id");
      g.found = true;
      g.prov = {ArgProvenance::Source::DatabaseValue, -1,
                coll + "." + std::to_string(idx) + ".id", id};
      return g;
    }
  }
  return g;
}

}  // namespace

GroundedChain ground_and_refine_chain(const std::vector<std::string>& walk,
                                      const EnvironmentBundle& env, std::uint64_t seed) {
  if (walk.empty()) throw ChainRejected("cannot ground an empty walk");
  Rng rng(derive_seed(seed, "ground"));
  Database db = env.db;
  std::vector<ChainStep> steps;
  std::vector<Value> outputs;
  std::vector<std::vector<WriteOp>> step_writes;
  for (std::size_t si = 0; si < walk.size(); ++si) {
    const CheckedTool* ct = env.find_tool(walk[si]);
    if (!ct) throw ChainRejected("walk references unknown tool '" + walk[si] + "'");
    ChainStep st;
    st.tool = walk[si];
    for (const ParamSig& p : ct->sig().params) {
      Grounding g = ground_param(p, outputs, env.db, rng);
      if (g.found) {
        st.args[p.name] = g.prov.value;
        st.provenance[p.name] = g.prov;
        continue;
      }
      if (!p.required) continue;  // optional parameters may stay unbound
      throw ChainRejected("cannot ground required parameter '" + walk[si] + "." + p.name + "'");
    }
    EvalOutcome out = evaluate_program(*ct->program, db, st.args);
    if (!out.ok)
      throw ChainRejected("step " + std::to_string(si) + " (" + walk[si] +
                          ") failed during grounding: " + out.error.code + ": " +
                          out.error.message);
    db = out.db_after;
    outputs.push_back(out.value);
    step_writes.push_back(out.writes);
    steps.push_back(std::move(st));
  }

  // Prune steps whose return feeds nothing downstream and whose execution
  // wrote nothing. The final step always stays (it carries the answer);
  // removal can expose new dead steps, so iterate to a fixed point.
  std::size_t n = steps.size();
  std::vector<bool> keep(n, true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!keep[i] || !step_writes[i].empty()) continue;
      bool used = false;
      for (std::size_t j = i + 1; j < n && !used; ++j) {
        if (!keep[j]) continue;
        for (const auto& [name, prov] : steps[j].provenance)
          if (prov.source == ArgProvenance::Source::PriorOutput &&
              prov.step == static_cast<int>(i)) {
            used = true;
            break;
          }
      }
      if (!used) {
        keep[i] = false;
        changed = true;
      }
    }
  }
  std::vector<int> remap(n, -1);
  GroundedChain chain;
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<int>(chain.steps.size());
    chain.steps.push_back(std::move(steps[i]));
  }
  for (ChainStep& st : chain.steps)
    for (auto& [name, prov] : st.provenance)
      if (prov.source == ArgProvenance::Source::PriorOutput) prov.step = remap[prov.step];

  // The refined chain must execute cleanly from a fresh snapshot.
  derive_ground_truth(chain, env);
  return chain;
}

GroundTruth derive_ground_truth(const GroundedChain& chain, const EnvironmentBundle& env) {
  if (chain.steps.empty()) throw ChainRejected("cannot derive ground truth from an empty chain");
  GroundTruth gt;
  Database db = env.db;
  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    const ChainStep& st = chain.steps[i];
    const CheckedTool* ct = env.find_tool(st.tool);
    if (!ct) throw ChainRejected("chain references unknown tool '" + st.tool + "'");
    EvalOutcome out = evaluate_program(*ct->program, db, st.args);
    if (!out.ok)
      throw ChainRejected("step " + std::to_string(i) + " (" + st.tool +
                          ") failed: " + out.error.code + ": " + out.error.message);
    db = out.db_after;
    gt.trace.emplace_back(out.value, out.writes);
  }
  gt.answer = gt.trace.back().first;
  gt.final_db = snapshot_database(db);
  return gt;
}

// ---------------------------------------------------------------------------
// Rubrics

namespace {

const char* check_name(RubricItem::Check c) {
  switch (c) {
    case RubricItem::Check::FieldPresent: return "field_present";
    case RubricItem::Check::SchemaMatch: return "schema_match";
    case RubricItem::Check::ValueEquals: return "value_equals";
    case RubricItem::Check::NumericClose: return "numeric_close";
  }
  return "field_present";
}

RubricItem::Check check_from_name(const std::string& s) {
  if (s == "field_present") return RubricItem::Check::FieldPresent;
  if (s == "schema_match") return RubricItem::Check::SchemaMatch;
  if (s == "value_equals") return RubricItem::Check::ValueEquals;
  if (s == "numeric_close") return RubricItem::Check::NumericClose;
  throw ValueError("unknown rubric check '" + s + "'");
}

}  // namespace

Value RubricItem::to_value() const {
  ValueObject o;
  o["check"] = Value(check_name(check));
  o["path"] = Value(path);
  o["kind"] = Value(std::string(kind_name(kind)));
  o["expect"] = expect;
  o["rel_tol"] = Value(rel_tol);
  o["abs_tol"] = Value(abs_tol);
  return Value(std::move(o));
}

RubricItem RubricItem::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  RubricItem it;
  it.check = check_from_name(need(o, "check").as_string());
  it.path = need(o, "path").as_string();
  it.kind = kind_from_name(need(o, "kind").as_string());
  it.expect = need(o, "expect");
  it.rel_tol = need(o, "rel_tol").as_number();
  it.abs_tol = need(o, "abs_tol").as_number();
  return it;
}

Value Rubric::to_value() const {
  ValueObject o;
  ValueList cs;
  for (const RubricItem& it : criteria) cs.push_back(it.to_value());
  o["criteria"] = Value(std::move(cs));
  o["threshold"] = Value(threshold);
  return Value(std::move(o));
}

Rubric Rubric::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  Rubric r;
  for (const Value& cv : need(o, "criteria").as_list())
    r.criteria.push_back(RubricItem::from_value(cv));
  r.threshold = need(o, "threshold").as_number();
  return r;
}

namespace {

void push_value_checks(Rubric& r, const std::string& path, const Value& v) {
  RubricItem schema;
  schema.check = RubricItem::Check::SchemaMatch;
  schema.path = path;
  schema.kind = v.kind();
  r.criteria.push_back(schema);
  RubricItem val;
  val.check = v.is_float() ? RubricItem::Check::NumericClose : RubricItem::Check::ValueEquals;
  val.path = path;
  val.kind = v.kind();
  val.expect = v;
  r.criteria.push_back(val);
}

}  // namespace

Rubric rubric_for_answer(const Value& answer) {
  Rubric r;
  if (answer.is_object()) {
    for (const auto& [field, v] : answer.as_object()) {
      RubricItem present;
      present.check = RubricItem::Check::FieldPresent;
      present.path = field;
      r.criteria.push_back(present);
      push_value_checks(r, field, v);
    }
  } else {
    push_value_checks(r, "", answer);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Descriptions

namespace {

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <typename Fn>
std::string map_tokens(const std::string& text, Fn fn) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    out += fn(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string scrub_description(const std::string& text, const std::vector<std::string>& banned) {
  std::set<std::string> bad;
  for (const std::string& b : banned) bad.insert(lower(b));
  return map_tokens(text, [&](const std::string& tok) {
    return bad.count(lower(tok)) ? std::string("that") : tok;
  });
}

bool description_clean(const std::string& text, const std::vector<std::string>& banned) {
  std::set<std::string> bad;
  for (const std::string& b : banned) bad.insert(lower(b));
  bool clean = true;
  map_tokens(text, [&](const std::string& tok) {
    if (bad.count(lower(tok))) clean = false;
    return tok;
  });
  return clean;
}

namespace {

std::string render_value(const Value& v) {
  if (v.is_string()) return v.as_string();
  return canonical_dump(v);
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// Tool name -> spec, resolved by parsing each spec's program header once.
std::map<std::string, const ToolSpec*> theme_tool_specs(const ThemeTemplate& theme) {
  std::map<std::string, const ToolSpec*> out;
  for (const ToolSpec& ts : theme.tools) {
    try {
      out[parse_program(ts.source)->sig.name] = &ts;
    } catch (const ParseError&) {
      // Unparsable spec sources never survive the retention filter anyway.
    }
  }
  return out;
}

std::vector<std::string> banned_names(const EnvironmentBundle& env) {
  std::vector<std::string> banned;
  for (const CheckedTool& t : env.tools) banned.push_back(t.sig().name);
  for (const auto& [coll, schema] : env.db.schema) banned.push_back(coll);
  return banned;
}

std::string render_chain_description(const GroundedChain& chain, const EnvironmentBundle& env,
                                     const ThemeTemplate& theme, const DifficultyKnobs& knobs,
                                     Rng& rng) {
  const DescriptionBank& bank = theme.bank;
  if (bank.openers.empty()) throw SynthesisError("theme '" + theme.theme + "' has no openers");
  const std::vector<std::string>& openers =
      (knobs.obfuscation_level >= 2 && !bank.vague_openers.empty()) ? bank.vague_openers
                                                                    : bank.openers;
  std::string text = rng.pick(openers);
  auto specs = theme_tool_specs(theme);
  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    const ChainStep& st = chain.steps[i];
    auto it = specs.find(st.tool);
    std::string phrase;
    if (it == specs.end()) {
      phrase = "carry out the usual step for it";
    } else {
      const ToolSpec& ts = *it->second;
      bool key_from_prior = false;
      for (const auto& [name, prov] : st.provenance)
        if (prov.source == ArgProvenance::Source::PriorOutput &&
            ts.intent.find("{" + name + "}") != std::string::npos)
          key_from_prior = true;
      phrase = key_from_prior && !ts.pronoun_intent.empty() ? ts.pronoun_intent : ts.intent;
      for (const auto& [name, arg] : st.args)
        phrase = replace_all(phrase, "{" + name + "}", render_value(arg));
    }
    if (i == 0) {
      text += " " + capitalize(phrase) + ".";
    } else {
      const std::string& conn =
          bank.connectors.empty() ? std::string("Then") : rng.pick(bank.connectors);
      text += " " + conn + " " + phrase + ".";
    }
  }
  text += " Report the final result.";
  if (knobs.obfuscation_level >= 1) {
    std::vector<std::string> banned = banned_names(env);
    text = scrub_description(text, banned);
    if (!description_clean(text, banned))
      throw SynthesisError("description still leaks tool or collection names after scrubbing");
  }
  return text;
}

}  // namespace

// ---------------------------------------------------------------------------
// Task records

Value TaskRecord::to_value() const {
  ValueObject o;
  o["task_id"] = Value(task_id);
  o["env_id"] = Value(env_id);
  o["kind"] = Value(kind);
  o["description"] = Value(description);
  o["ground_truth"] = ground_truth;
  o["rubric"] = rubric.to_value();
  o["verifier_source"] = Value(verifier_source);
  o["solution_source"] = Value(solution_source);
  o["chain"] = chain.to_value();
  o["template_args"] = template_args;
  o["expected_db_digest"] = Value(u64_str(expected_db_digest));
  o["mutating"] = Value(mutating);
  o["difficulty"] = difficulty.to_value();
  o["seed"] = Value(u64_str(seed));
  o["template_id"] = Value(template_id);
  return Value(std::move(o));
}

TaskRecord TaskRecord::from_value(const Value& v) {
  const ValueObject& o = v.as_object();
  TaskRecord t;
  t.task_id = need(o, "task_id").as_string();
  t.env_id = need(o, "env_id").as_string();
  t.kind = need(o, "kind").as_string();
  t.description = need(o, "description").as_string();
  t.ground_truth = need(o, "ground_truth");
  t.rubric = Rubric::from_value(need(o, "rubric"));
  t.verifier_source = need(o, "verifier_source").as_string();
  t.solution_source = need(o, "solution_source").as_string();
  t.chain = GroundedChain::from_value(need(o, "chain"));
  t.template_args = need(o, "template_args");
  t.expected_db_digest = str_u64(need(o, "expected_db_digest"));
  t.mutating = need(o, "mutating").as_bool();
  t.difficulty = DifficultyKnobs::from_value(need(o, "difficulty"));
  t.seed = str_u64(need(o, "seed"));
  t.template_id = need(o, "template_id").as_string();
  return t;
}

TaskRecord generate_graph_task(const GroundedChain& chain, const GroundTruth& truth,
                               const EnvironmentBundle& env, const ThemeTemplate& theme,
                               const DifficultyKnobs& knobs, std::uint64_t seed) {
  TaskRecord t;
  t.task_id = env.env_id + "-walk-s" + u64_str(seed);
  t.env_id = env.env_id;
  t.kind = "graph";
  Rng rng(derive_seed(seed, "desc"));
  t.description = render_chain_description(chain, env, theme, knobs, rng);
  t.ground_truth = truth.answer;
  t.rubric = rubric_for_answer(truth.answer);
  t.chain = chain;
  t.template_args = Value(ValueObject{});
  t.expected_db_digest = truth.final_db.digest;
  for (const auto& [value, writes] : truth.trace)
    if (!writes.empty()) t.mutating = true;
  t.difficulty = knobs;
  t.seed = seed;
  t.template_id = "walk";
  return t;
}

// ---------------------------------------------------------------------------
// Batch synthesis

std::vector<TaskRecord> synthesize_tasks(const EnvironmentBundle& env, const ThemeTemplate& theme,
                                         const DifficultyKnobs& knobs, int n_graph, int n_prog,
                                         std::uint64_t seed, const std::string& id_prefix,
                                         const std::map<std::string, double>& boost) {
  if (n_graph < 0 || n_prog < 0) throw ValueError("task counts must be non-negative");
  std::vector<TaskRecord> out;
  ToolGraph g = build_tool_graph(env.tools, env.db);
  int attempts = 0;
  const int max_attempts = 60 * (n_graph + 1);
  int made = 0;
  while (made < n_graph && attempts < max_attempts) {
    std::uint64_t s = derive_seed(seed, "walkseed", static_cast<std::uint64_t>(attempts));
    ++attempts;
    try {
      std::vector<std::string> walk = sample_tool_walk(g, knobs, s, boost);
      GroundedChain chain = ground_and_refine_chain(walk, env, s);
      GroundTruth truth = derive_ground_truth(chain, env);
      TaskRecord t = generate_graph_task(chain, truth, env, theme, knobs, s);
      t.task_id = id_prefix + env.env_id + "-g" + std::to_string(made);
      out.push_back(std::move(t));
      ++made;
    } catch (const ChainRejected&) {
    } catch (const SynthesisError&) {
    }
  }
  if (made < n_graph)
    throw SynthesisError("only synthesized " + std::to_string(made) + " of " +
                         std::to_string(n_graph) + " graph tasks for " + env.env_id);
  attempts = 0;
  const int max_prog_attempts = 60 * (n_prog + 1);
  made = 0;
  while (made < n_prog && attempts < max_prog_attempts) {
    std::uint64_t s = derive_seed(seed, "progseed", static_cast<std::uint64_t>(attempts));
    ++attempts;
    const std::string& family =
        kProgrammaticFamilies[static_cast<std::size_t>(made) % kProgrammaticFamilies.size()];
    try {
      TaskRecord t = generate_programmatic_task(family, env, theme, knobs, s);
      t.task_id = id_prefix + env.env_id + "-p" + std::to_string(made);
      out.push_back(std::move(t));
      ++made;
    } catch (const SynthesisError&) {
    }
  }
  if (made < n_prog)
    throw SynthesisError("only synthesized " + std::to_string(made) + " of " +
                         std::to_string(n_prog) + " programmatic tasks for " + env.env_id);
  return out;
}

}  // namespace arena
