#include "arena/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace arena {
namespace {

// ---- small file helpers ----------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open file: " + path, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ValueError("cannot write file: " + path);
}

Value parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return canonical_parse(text);
  } catch (const Error& e) {
    throw ValueError(path + ": " + e.what());
  }
}

std::string dump_json(const Value& v) { return canonical_dump(v, 2) + "\n"; }

// ---- config field readers (lenient values, dotted-path errors) -------------

[[noreturn]] void cfg_fail(const std::string& path, const std::string& why) {
  throw ValueError(path + ": " + why);
}

std::string join_field(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const ValueObject& as_section(const Value& v, const std::string& path) {
  if (v.kind() != Kind::Object) cfg_fail(path, "must be an object");
  return v.as_object();
}

void check_keys(const ValueObject& o, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : o) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) cfg_fail(join_field(prefix, key), "unknown field");
  }
}

std::int64_t opt_int(const ValueObject& o, const char* key, const std::string& prefix,
                     std::int64_t def) {
  auto it = o.find(key);
  if (it == o.end()) return def;
  if (it->second.kind() != Kind::Int) cfg_fail(join_field(prefix, key), "must be an integer");
  return it->second.as_int();
}

double opt_num(const ValueObject& o, const char* key, const std::string& prefix, double def) {
  auto it = o.find(key);
  if (it == o.end()) return def;
  if (!it->second.is_number()) cfg_fail(join_field(prefix, key), "must be a number");
  return it->second.as_number();
}

bool opt_bool(const ValueObject& o, const char* key, const std::string& prefix, bool def) {
  auto it = o.find(key);
  if (it == o.end()) return def;
  if (it->second.kind() != Kind::Bool) cfg_fail(join_field(prefix, key), "must be a boolean");
  return it->second.as_bool();
}

std::string opt_str(const ValueObject& o, const char* key, const std::string& prefix,
                    std::string def) {
  auto it = o.find(key);
  if (it == o.end()) return def;
  if (it->second.kind() != Kind::String) cfg_fail(join_field(prefix, key), "must be a string");
  return it->second.as_string();
}

std::uint64_t opt_seed(const ValueObject& o, const char* key, const std::string& prefix,
                       std::uint64_t def) {
  auto it = o.find(key);
  if (it == o.end()) return def;
  const Value& v = it->second;
  if (v.kind() == Kind::Int) {
    if (v.as_int() < 0) cfg_fail(join_field(prefix, key), "must be non-negative");
    return static_cast<std::uint64_t>(v.as_int());
  }
  if (v.kind() == Kind::String) {
    const std::string& s = v.as_string();
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      cfg_fail(join_field(prefix, key), "must be a non-negative integer");
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      cfg_fail(join_field(prefix, key), "integer out of range");
    }
  }
  cfg_fail(join_field(prefix, key), "must be a non-negative integer");
}

RunConfig parse_config_value(const Value& v) {
  const ValueObject& root = as_section(v, "config");
  check_keys(root, "", {"seed", "paths", "forge", "synth", "rollout", "policy", "train",
                        "arena", "parallelism"});
  RunConfig c;
  c.seed = opt_seed(root, "seed", "", c.seed);
  c.parallelism = static_cast<int>(opt_int(root, "parallelism", "", c.parallelism));

  if (auto it = root.find("paths"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "paths");
    check_keys(o, "paths", {"ecosystem_dir", "suite_file", "output_dir"});
    c.paths.ecosystem_dir = opt_str(o, "ecosystem_dir", "paths", c.paths.ecosystem_dir);
    c.paths.suite_file = opt_str(o, "suite_file", "paths", c.paths.suite_file);
    c.paths.output_dir = opt_str(o, "output_dir", "paths", c.paths.output_dir);
  }

  if (auto it = root.find("forge"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "forge");
    check_keys(o, "forge", {"themes", "envs_per_theme", "taxonomy_k1", "taxonomy_k2"});
    if (auto th = o.find("themes"); th != o.end()) {
      if (th->second.kind() != Kind::List) cfg_fail("forge.themes", "must be a list of strings");
      c.forge.themes.clear();
      for (const Value& t : th->second.as_list()) {
        if (t.kind() != Kind::String) cfg_fail("forge.themes", "must be a list of strings");
        c.forge.themes.push_back(t.as_string());
      }
    }
    c.forge.envs_per_theme = static_cast<int>(opt_int(o, "envs_per_theme", "forge", c.forge.envs_per_theme));
    c.forge.taxonomy_k1 = static_cast<int>(opt_int(o, "taxonomy_k1", "forge", c.forge.taxonomy_k1));
    c.forge.taxonomy_k2 = static_cast<int>(opt_int(o, "taxonomy_k2", "forge", c.forge.taxonomy_k2));
  }

  if (auto it = root.find("synth"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "synth");
    check_keys(o, "synth", {"max_walk_len", "weak_indep_bias", "obfuscation_level",
                            "graph_per_env", "prog_per_env", "consistency_filter"});
    c.synth.knobs.max_walk_len = opt_int(o, "max_walk_len", "synth", c.synth.knobs.max_walk_len);
    c.synth.knobs.weak_indep_bias =
        opt_num(o, "weak_indep_bias", "synth", c.synth.knobs.weak_indep_bias);
    c.synth.knobs.obfuscation_level =
        static_cast<int>(opt_int(o, "obfuscation_level", "synth", c.synth.knobs.obfuscation_level));
    c.synth.graph_per_env = static_cast<int>(opt_int(o, "graph_per_env", "synth", c.synth.graph_per_env));
    c.synth.prog_per_env = static_cast<int>(opt_int(o, "prog_per_env", "synth", c.synth.prog_per_env));
    c.synth.consistency_filter = opt_bool(o, "consistency_filter", "synth", c.synth.consistency_filter);
  }

  if (auto it = root.find("rollout"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "rollout");
    check_keys(o, "rollout", {"budget"});
    c.rollout.budget = static_cast<int>(opt_int(o, "budget", "rollout", c.rollout.budget));
  }

  if (auto it = root.find("policy"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "policy");
    check_keys(o, "policy", {"dim", "temperature"});
    c.policy.dim = static_cast<int>(opt_int(o, "dim", "policy", c.policy.dim));
    c.policy.temperature = opt_num(o, "temperature", "policy", c.policy.temperature);
  }

  if (auto it = root.find("train"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "train");
    check_keys(o, "train", {"eps_low", "eps_high", "beta", "group_size", "learning_rate",
                            "steps", "batch_tasks", "budget"});
    c.train.eps_low = opt_num(o, "eps_low", "train", c.train.eps_low);
    c.train.eps_high = opt_num(o, "eps_high", "train", c.train.eps_high);
    c.train.beta = opt_num(o, "beta", "train", c.train.beta);
    c.train.group_size = static_cast<int>(opt_int(o, "group_size", "train", c.train.group_size));
    c.train.learning_rate = opt_num(o, "learning_rate", "train", c.train.learning_rate);
    c.train.steps = static_cast<int>(opt_int(o, "steps", "train", c.train.steps));
    c.train.batch_tasks = static_cast<int>(opt_int(o, "batch_tasks", "train", c.train.batch_tasks));
    c.train.budget = static_cast<int>(opt_int(o, "budget", "train", c.train.budget));
  }

  if (auto it = root.find("arena"); it != root.end()) {
    const ValueObject& o = as_section(it->second, "arena");
    check_keys(o, "arena", {"rounds", "k", "per_env_graph", "per_env_prog", "targeted_graph",
                            "targeted_prog", "budget", "boost_factor", "hold_out_arena", "growth"});
    c.arena_rounds = static_cast<int>(opt_int(o, "rounds", "arena", c.arena_rounds));
    c.arena.k = static_cast<int>(opt_int(o, "k", "arena", c.arena.k));
    c.arena.per_env_graph = static_cast<int>(opt_int(o, "per_env_graph", "arena", c.arena.per_env_graph));
    c.arena.per_env_prog = static_cast<int>(opt_int(o, "per_env_prog", "arena", c.arena.per_env_prog));
    c.arena.targeted_graph = static_cast<int>(opt_int(o, "targeted_graph", "arena", c.arena.targeted_graph));
    c.arena.targeted_prog = static_cast<int>(opt_int(o, "targeted_prog", "arena", c.arena.targeted_prog));
    c.arena.budget = static_cast<int>(opt_int(o, "budget", "arena", c.arena.budget));
    c.arena.boost_factor = opt_num(o, "boost_factor", "arena", c.arena.boost_factor);
    c.arena.hold_out_arena = opt_bool(o, "hold_out_arena", "arena", c.arena.hold_out_arena);
    if (auto g = o.find("growth"); g != o.end()) {
      const ValueObject& go = as_section(g->second, "arena.growth");
      check_keys(go, "arena.growth",
                 {"rounds", "add_records", "add_fields", "add_linked_collection_prob"});
      c.arena.growth.rounds = static_cast<int>(opt_int(go, "rounds", "arena.growth", c.arena.growth.rounds));
      c.arena.growth.add_records =
          static_cast<int>(opt_int(go, "add_records", "arena.growth", c.arena.growth.add_records));
      c.arena.growth.add_fields =
          static_cast<int>(opt_int(go, "add_fields", "arena.growth", c.arena.growth.add_fields));
      c.arena.growth.add_linked_collection_prob = opt_num(
          go, "add_linked_collection_prob", "arena.growth", c.arena.growth.add_linked_collection_prob);
    }
  }

  // The synthesis knobs and the GRPO settings have a single source of truth;
  // the arena loop inherits them rather than accepting its own copies.
  c.arena.knobs = c.synth.knobs;
  c.arena.train = c.train;
  c.arena.out_dir.clear();
  return c;
}

void validate_config(const RunConfig& c) {
  if (c.paths.ecosystem_dir.empty()) cfg_fail("paths.ecosystem_dir", "must be non-empty");
  if (c.paths.output_dir.empty()) cfg_fail("paths.output_dir", "must be non-empty");
  for (const std::string& t : c.forge.themes) {
    bool known = false;
    for (const ThemeTemplate& tmpl : builtin_themes())
      if (tmpl.theme == t) known = true;
    if (!known) cfg_fail("forge.themes", "unknown theme '" + t + "'");
  }
  if (c.forge.envs_per_theme < 1) cfg_fail("forge.envs_per_theme", "must be >= 1");
  if (c.forge.taxonomy_k1 < 1) cfg_fail("forge.taxonomy_k1", "must be >= 1");
  if (c.forge.taxonomy_k2 < c.forge.taxonomy_k1)
    cfg_fail("forge.taxonomy_k2", "must be >= forge.taxonomy_k1");
  if (c.synth.knobs.max_walk_len < 1) cfg_fail("synth.max_walk_len", "must be >= 1");
  if (c.synth.knobs.weak_indep_bias < 0) cfg_fail("synth.weak_indep_bias", "must be >= 0");
  if (c.synth.knobs.obfuscation_level < 0 || c.synth.knobs.obfuscation_level > 2)
    cfg_fail("synth.obfuscation_level", "must be in [0, 2]");
  if (c.synth.graph_per_env < 0) cfg_fail("synth.graph_per_env", "must be >= 0");
  if (c.synth.prog_per_env < 0) cfg_fail("synth.prog_per_env", "must be >= 0");
  if (c.synth.graph_per_env + c.synth.prog_per_env < 1)
    cfg_fail("synth.graph_per_env", "graph_per_env + prog_per_env must be >= 1");
  if (c.rollout.budget < 1) cfg_fail("rollout.budget", "must be >= 1");
  if (c.policy.dim < 1) cfg_fail("policy.dim", "must be >= 1");
  if (!(c.policy.temperature > 0)) cfg_fail("policy.temperature", "must be > 0");
  if (!(c.train.eps_low > 0)) cfg_fail("train.eps_low", "must be > 0");
  if (c.train.eps_high < c.train.eps_low) cfg_fail("train.eps_high", "must be >= train.eps_low");
  if (c.train.beta < 0) cfg_fail("train.beta", "must be >= 0");
  if (c.train.group_size < 2) cfg_fail("train.group_size", "must be >= 2");
  if (!(c.train.learning_rate > 0)) cfg_fail("train.learning_rate", "must be > 0");
  if (c.train.steps < 0) cfg_fail("train.steps", "must be >= 0");
  if (c.train.batch_tasks < 1) cfg_fail("train.batch_tasks", "must be >= 1");
  if (c.train.budget < 1) cfg_fail("train.budget", "must be >= 1");
  if (c.arena_rounds < 1) cfg_fail("arena.rounds", "must be >= 1");
  if (c.arena.k < 1) cfg_fail("arena.k", "must be >= 1");
  if (c.arena.per_env_graph < 0) cfg_fail("arena.per_env_graph", "must be >= 0");
  if (c.arena.per_env_prog < 0) cfg_fail("arena.per_env_prog", "must be >= 0");
  if (c.arena.per_env_graph + c.arena.per_env_prog < 1)
    cfg_fail("arena.per_env_graph", "per_env_graph + per_env_prog must be >= 1");
  if (c.arena.targeted_graph < 0) cfg_fail("arena.targeted_graph", "must be >= 0");
  if (c.arena.targeted_prog < 0) cfg_fail("arena.targeted_prog", "must be >= 0");
  if (c.arena.budget < 1) cfg_fail("arena.budget", "must be >= 1");
  if (!(c.arena.boost_factor > 0)) cfg_fail("arena.boost_factor", "must be > 0");
  if (c.arena.growth.rounds < 0) cfg_fail("arena.growth.rounds", "must be >= 0");
  if (c.arena.growth.add_records < 0) cfg_fail("arena.growth.add_records", "must be >= 0");
  if (c.arena.growth.add_fields < 0) cfg_fail("arena.growth.add_fields", "must be >= 0");
  if (c.arena.growth.add_linked_collection_prob < 0 ||
      c.arena.growth.add_linked_collection_prob > 1)
    cfg_fail("arena.growth.add_linked_collection_prob", "must be in [0, 1]");
  if (c.parallelism < 1) cfg_fail("parallelism", "must be >= 1");
}

}  // namespace

// ---- RunConfig --------------------------------------------------------------

std::string RunConfig::suite_path() const {
  if (!paths.suite_file.empty()) return paths.suite_file;
  return (fs::path(paths.output_dir) / "tasks.jsonl").string();
}

Value RunConfig::to_value() const {
  ValueObject root;
  if (seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    root["seed"] = Value(static_cast<std::int64_t>(seed));
  else
    root["seed"] = Value(std::to_string(seed));
  ValueObject p;
  p["ecosystem_dir"] = Value(paths.ecosystem_dir);
  p["suite_file"] = Value(paths.suite_file);
  p["output_dir"] = Value(paths.output_dir);
  root["paths"] = Value(std::move(p));
  ValueObject f;
  ValueList th;
  for (const std::string& t : forge.themes) th.push_back(Value(t));
  f["themes"] = Value(std::move(th));
  f["envs_per_theme"] = Value(static_cast<std::int64_t>(forge.envs_per_theme));
  f["taxonomy_k1"] = Value(static_cast<std::int64_t>(forge.taxonomy_k1));
  f["taxonomy_k2"] = Value(static_cast<std::int64_t>(forge.taxonomy_k2));
  root["forge"] = Value(std::move(f));
  ValueObject s;
  s["max_walk_len"] = Value(synth.knobs.max_walk_len);
  s["weak_indep_bias"] = Value(synth.knobs.weak_indep_bias);
  s["obfuscation_level"] = Value(static_cast<std::int64_t>(synth.knobs.obfuscation_level));
  s["graph_per_env"] = Value(static_cast<std::int64_t>(synth.graph_per_env));
  s["prog_per_env"] = Value(static_cast<std::int64_t>(synth.prog_per_env));
  s["consistency_filter"] = Value(synth.consistency_filter);
  root["synth"] = Value(std::move(s));
  ValueObject r;
  r["budget"] = Value(static_cast<std::int64_t>(rollout.budget));
  root["rollout"] = Value(std::move(r));
  ValueObject po;
  po["dim"] = Value(static_cast<std::int64_t>(policy.dim));
  po["temperature"] = Value(policy.temperature);
  root["policy"] = Value(std::move(po));
  ValueObject t;
  t["eps_low"] = Value(train.eps_low);
  t["eps_high"] = Value(train.eps_high);
  t["beta"] = Value(train.beta);
  t["group_size"] = Value(static_cast<std::int64_t>(train.group_size));
  t["learning_rate"] = Value(train.learning_rate);
  t["steps"] = Value(static_cast<std::int64_t>(train.steps));
  t["batch_tasks"] = Value(static_cast<std::int64_t>(train.batch_tasks));
  t["budget"] = Value(static_cast<std::int64_t>(train.budget));
  root["train"] = Value(std::move(t));
  ValueObject a;
  a["rounds"] = Value(static_cast<std::int64_t>(arena_rounds));
  a["k"] = Value(static_cast<std::int64_t>(arena.k));
  a["per_env_graph"] = Value(static_cast<std::int64_t>(arena.per_env_graph));
  a["per_env_prog"] = Value(static_cast<std::int64_t>(arena.per_env_prog));
  a["targeted_graph"] = Value(static_cast<std::int64_t>(arena.targeted_graph));
  a["targeted_prog"] = Value(static_cast<std::int64_t>(arena.targeted_prog));
  a["budget"] = Value(static_cast<std::int64_t>(arena.budget));
  a["boost_factor"] = Value(arena.boost_factor);
  a["hold_out_arena"] = Value(arena.hold_out_arena);
  ValueObject g;
  g["rounds"] = Value(static_cast<std::int64_t>(arena.growth.rounds));
  g["add_records"] = Value(static_cast<std::int64_t>(arena.growth.add_records));
  g["add_fields"] = Value(static_cast<std::int64_t>(arena.growth.add_fields));
  g["add_linked_collection_prob"] = Value(arena.growth.add_linked_collection_prob);
  a["growth"] = Value(std::move(g));
  root["arena"] = Value(std::move(a));
  root["parallelism"] = Value(static_cast<std::int64_t>(parallelism));
  return Value(std::move(root));
}

RunConfig RunConfig::from_value(const Value& v) {
  RunConfig c = parse_config_value(v);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  Value v{ValueObject{}};
  if (!path.empty()) {
    const std::string text = read_text_file(path);
    try {
      v = canonical_parse(text);
    } catch (const Error& e) {
      throw ValueError("config " + path + ": " + e.what());
    }
  }
  RunConfig c = parse_config_value(v);
  if (const char* od = std::getenv("ARENA_OUTPUT_DIR"); od != nullptr && *od != '\0')
    c.paths.output_dir = od;
  if (const char* par = std::getenv("ARENA_PARALLELISM"); par != nullptr && *par != '\0') {
    const std::string s(par);
    if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 6 || std::stoi(s) < 1)
      cfg_fail("ARENA_PARALLELISM", "must be a positive integer");
    c.parallelism = std::stoi(s);
  }
  validate_config(c);
  return c;
}

// ---- environment bundle directories ----------------------------------------

namespace {

// Slice a concatenated source file into per-program sources: a new program
// starts at a top-level (brace depth zero, outside strings) line beginning
// with "tool " or "verifier ".
std::vector<std::string> split_tool_sources(const std::string& text) {
  std::vector<std::size_t> starts;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\')
        ++i;
      else if (ch == '"')
        in_string = false;
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == '{' || ch == '(' || ch == '[') {
      ++depth;
    } else if (ch == '}' || ch == ')' || ch == ']') {
      --depth;
    } else if (depth == 0 && (i == 0 || text[i - 1] == '\n')) {
      if (text.compare(i, 5, "tool ") == 0 || text.compare(i, 9, "verifier ") == 0)
        starts.push_back(i);
    }
  }
  std::vector<std::string> out;
  for (std::size_t j = 0; j < starts.size(); ++j) {
    const std::size_t end = j + 1 < starts.size() ? starts[j + 1] : text.size();
    std::string src = text.substr(starts[j], end - starts[j]);
    while (!src.empty() && (src.back() == '\n' || src.back() == ' ')) src.pop_back();
    src.push_back('\n');
    out.push_back(std::move(src));
  }
  return out;
}

// Best-effort program name from a source header, for pairing unit cases
// before a full parse: the token between the leading keyword and '('.
std::string source_program_name(const std::string& src) {
  std::size_t pos = 0;
  if (src.compare(0, 5, "tool ") == 0)
    pos = 5;
  else if (src.compare(0, 9, "verifier ") == 0)
    pos = 9;
  else
    return "";
  const std::size_t open = src.find('(', pos);
  if (open == std::string::npos) return "";
  std::string name = src.substr(pos, open - pos);
  while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
  return name;
}

struct BundleParts {
  Value manifest;
  Database db;
  std::vector<ToolCandidate> candidates;
};

const Value& manifest_field(const Value& man, const char* key, const std::string& dir) {
  const Value* f = man.find(key);
  if (f == nullptr) throw ValueError("bundle " + dir + ": manifest missing '" + key + "'");
  return *f;
}

BundleParts read_bundle_dir(const std::string& dir) {
  BundleParts parts;
  parts.manifest = parse_json_file((fs::path(dir) / "manifest.json").string());
  const Value& colls = manifest_field(parts.manifest, "collections", dir);
  if (colls.kind() != Kind::List)
    throw ValueError("bundle " + dir + ": manifest 'collections' must be a list");

  ValueObject docs_by_coll;
  ValueObject schema_by_coll;
  for (const Value& cv : colls.as_list()) {
    const std::string name = cv.as_string();
    const Value file = parse_json_file((fs::path(dir) / "db" / (name + ".json")).string());
    const Value* schema = file.find("schema");
    const Value* docs = file.find("docs");
    if (schema == nullptr || docs == nullptr)
      throw ValueError("bundle " + dir + ": db/" + name + ".json needs 'schema' and 'docs'");
    schema_by_coll[name] = *schema;
    docs_by_coll[name] = *docs;
  }
  ValueObject dbv;
  dbv["collections"] = Value(std::move(docs_by_coll));
  dbv["schema"] = Value(std::move(schema_by_coll));
  parts.db = Database::from_value(Value(std::move(dbv)));
  validate_database(parts.db);

  const std::vector<std::string> sources =
      split_tool_sources(read_text_file((fs::path(dir) / "tools.tl").string()));
  if (sources.empty()) throw ValueError("bundle " + dir + ": tools.tl contains no programs");

  // tests.json: either a flat list of {"tool": ..., <unit case fields>} or an
  // object mapping tool name -> list of unit cases.
  const Value tests = parse_json_file((fs::path(dir) / "tests.json").string());
  std::map<std::string, std::vector<UnitCase>> cases_by_tool;
  if (tests.kind() == Kind::List) {
    std::size_t n = 0;
    for (const Value& entry : tests.as_list()) {
      ++n;
      const Value* tool = entry.find("tool");
      if (tool == nullptr || tool->kind() != Kind::String)
        throw ValueError("bundle " + dir + ": tests.json entry " + std::to_string(n) +
                         " needs a 'tool' string");
      cases_by_tool[tool->as_string()].push_back(UnitCase::from_value(entry));
    }
  } else if (tests.kind() == Kind::Object) {
    for (const auto& [tool, list] : tests.as_object()) {
      if (list.kind() != Kind::List)
        throw ValueError("bundle " + dir + ": tests.json entry for '" + tool +
                         "' must be a list");
      for (const Value& entry : list.as_list())
        cases_by_tool[tool].push_back(UnitCase::from_value(entry));
    }
  } else {
    throw ValueError("bundle " + dir + ": tests.json must be a list or an object");
  }

  for (const std::string& src : sources) {
    ToolCandidate cand;
    cand.source = src;
    auto it = cases_by_tool.find(source_program_name(src));
    if (it != cases_by_tool.end()) cand.cases = it->second;
    parts.candidates.push_back(std::move(cand));
  }
  return parts;
}

std::string manifest_string(const Value& man, const char* key, const std::string& dir) {
  const Value& f = manifest_field(man, key, dir);
  if (f.kind() != Kind::String)
    throw ValueError("bundle " + dir + ": manifest '" + key + "' must be a string");
  return f.as_string();
}

}  // namespace

void save_environment_dir(const EnvironmentBundle& env, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "db");

  const Value dbv = env.db.to_value();
  const Value& db_colls = *dbv.find("collections");
  const Value& db_schema = *dbv.find("schema");
  ValueList coll_names;
  for (const auto& [name, docs] : db_colls.as_object()) {
    ValueObject file;
    file["schema"] = *db_schema.find(name);
    file["docs"] = docs;
    write_text_file((fs::path(dir) / "db" / (name + ".json")).string(),
                    dump_json(Value(std::move(file))));
    coll_names.push_back(Value(name));
  }

  ValueObject man;
  man["env_id"] = Value(env.env_id);
  man["theme"] = Value(env.theme);
  man["first_tier"] = Value(env.first_tier);
  man["second_tier"] = Value(env.second_tier);
  man["collections"] = Value(std::move(coll_names));
  ValueList tool_names;
  std::string sources;
  ValueList tests;
  for (const CheckedTool& t : env.tools) {
    const std::string name = t.sig().name;
    tool_names.push_back(Value(name));
    std::string src = print_program(*t.program);
    if (src.empty() || src.back() != '\n') src.push_back('\n');
    if (!sources.empty()) sources.push_back('\n');
    sources += src;
    for (const UnitCase& c : t.cases) {
      const Value cv = c.to_value();
      ValueObject entry = cv.as_object();
      entry["tool"] = Value(name);
      tests.push_back(Value(std::move(entry)));
    }
  }
  man["tools"] = Value(std::move(tool_names));
  ValueList reps;
  for (const ToolReport& r : env.reports) {
    ValueObject ro;
    ro["name"] = Value(r.name);
    ro["parsed"] = Value(r.parsed);
    ro["checked"] = Value(r.checked);
    ro["accuracy"] = Value(r.accuracy);
    ro["retained"] = Value(r.retained);
    ro["reason"] = Value(r.reason);
    reps.push_back(Value(std::move(ro)));
  }
  man["reports"] = Value(std::move(reps));

  write_text_file((fs::path(dir) / "manifest.json").string(), dump_json(Value(std::move(man))));
  write_text_file((fs::path(dir) / "tools.tl").string(), sources);
  write_text_file((fs::path(dir) / "tests.json").string(), dump_json(Value(std::move(tests))));
}

EnvironmentBundle load_environment_dir(const std::string& dir) {
  BundleParts parts = read_bundle_dir(dir);
  FilterResult fr = filter_toolset(parts.candidates, parts.db);
  if (fr.retained.size() != parts.candidates.size()) {
    std::string what;
    for (const ToolReport& r : fr.reports) {
      if (r.retained) continue;
      if (!what.empty()) what += "; ";
      what += r.name.empty() ? "<unnamed>" : r.name;
      what += " (" + (r.reason.empty() ? "accuracy " + std::to_string(r.accuracy) : r.reason) + ")";
    }
    throw ValueError("bundle " + dir + ": tool regression: " + what);
  }
  EnvironmentBundle env;
  env.env_id = manifest_string(parts.manifest, "env_id", dir);
  env.theme = manifest_string(parts.manifest, "theme", dir);
  env.first_tier = manifest_string(parts.manifest, "first_tier", dir);
  env.second_tier = manifest_string(parts.manifest, "second_tier", dir);
  env.db = std::move(parts.db);
  env.tools = std::move(fr.retained);
  env.reports = std::move(fr.reports);
  return env;
}

std::vector<ToolReport> audit_environment_dir(const std::string& dir) {
  BundleParts parts = read_bundle_dir(dir);
  try {
    return filter_toolset(parts.candidates, parts.db).reports;
  } catch (const EnvironmentRejected& e) {
    return e.reports;  // every tool dropped is still a reportable audit
  }
}

std::vector<EnvironmentBundle> load_ecosystem(const std::string& dir) {
  if (!fs::is_directory(dir)) throw NotFoundError("ecosystem directory not found: " + dir, dir);
  std::vector<std::string> bundle_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      bundle_dirs.push_back(entry.path().string());
  }
  std::sort(bundle_dirs.begin(), bundle_dirs.end());
  std::vector<EnvironmentBundle> envs;
  envs.reserve(bundle_dirs.size());
  for (const std::string& b : bundle_dirs) envs.push_back(load_environment_dir(b));
  std::sort(envs.begin(), envs.end(),
            [](const EnvironmentBundle& a, const EnvironmentBundle& b) { return a.env_id < b.env_id; });
  return envs;
}

// ---- task suites ------------------------------------------------------------

void save_suite(const std::vector<TaskRecord>& tasks, const std::string& path) {
  std::string text;
  for (const TaskRecord& t : tasks) {
    text += canonical_dump(t.to_value(), -1);
    text.push_back('\n');
  }
  write_text_file(path, text);
}

std::vector<TaskRecord> load_suite(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<TaskRecord> tasks;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(TaskRecord::from_value(canonical_parse(line)));
    } catch (const Error& e) {
      throw ValueError("suite " + path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return tasks;
}

// ---- trajectory dumps -------------------------------------------------------

EpisodeDump episode_dump(const Trajectory& t, const std::string& env_id, double reward) {
  EpisodeDump d;
  d.task_id = t.task_id;
  d.env_id = env_id;
  d.steps = t.steps;
  for (TrajectoryStep& s : d.steps) s.features.clear();
  d.terminated = t.terminated;
  d.final_answer = t.final_answer;
  d.final_db_digest = t.final_db.digest;
  d.reward = reward;
  return d;
}

void save_trajectories(const std::vector<EpisodeDump>& dumps, const std::string& path) {
  std::string text;
  for (const EpisodeDump& d : dumps) {
    for (std::size_t i = 0; i < d.steps.size(); ++i) {
      const Value sv = d.steps[i].to_value();
      ValueObject o = sv.as_object();
      o["task_id"] = Value(d.task_id);
      o["step"] = Value(static_cast<std::int64_t>(i));
      text += canonical_dump(Value(std::move(o)), -1);
      text.push_back('\n');
    }
    ValueObject end;
    end["task_id"] = Value(d.task_id);
    end["env_id"] = Value(d.env_id);
    end["episode_end"] = Value(true);
    end["terminated"] = Value(d.terminated);
    end["final_answer"] = d.final_answer;
    end["final_db_digest"] = Value(std::to_string(d.final_db_digest));
    end["reward"] = Value(d.reward);
    text += canonical_dump(Value(std::move(end)), -1);
    text.push_back('\n');
  }
  write_text_file(path, text);
}

std::vector<EpisodeDump> load_trajectories(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<EpisodeDump> out;
  std::vector<TrajectoryStep> steps;
  std::string steps_task;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  auto fail = [&](const std::string& why) -> ValueError {
    return ValueError("trajectories " + path + " line " + std::to_string(n) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Value v;
    try {
      v = canonical_parse(line);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    const Value* tid = v.find("task_id");
    if (tid == nullptr || tid->kind() != Kind::String) throw fail("missing 'task_id'");
    if (v.find("episode_end") != nullptr) {
      EpisodeDump d;
      d.task_id = tid->as_string();
      if (!steps.empty() && steps_task != d.task_id) throw fail("interleaved episodes");
      const Value* env = v.find("env_id");
      if (env == nullptr || env->kind() != Kind::String) throw fail("missing 'env_id'");
      d.env_id = env->as_string();
      const Value* term = v.find("terminated");
      if (term == nullptr || term->kind() != Kind::String) throw fail("missing 'terminated'");
      d.terminated = term->as_string();
      const Value* ans = v.find("final_answer");
      if (ans == nullptr) throw fail("missing 'final_answer'");
      d.final_answer = *ans;
      const Value* dig = v.find("final_db_digest");
      if (dig == nullptr || dig->kind() != Kind::String) throw fail("missing 'final_db_digest'");
      try {
        d.final_db_digest = std::stoull(dig->as_string());
      } catch (const std::exception&) {
        throw fail("bad 'final_db_digest'");
      }
      const Value* rew = v.find("reward");
      if (rew == nullptr || !rew->is_number()) throw fail("missing 'reward'");
      d.reward = rew->as_number();
      d.steps = std::move(steps);
      steps.clear();
      out.push_back(std::move(d));
    } else {
      if (!steps.empty() && steps_task != tid->as_string()) throw fail("interleaved episodes");
      steps_task = tid->as_string();
      try {
        steps.push_back(TrajectoryStep::from_value(v));
      } catch (const Error& e) {
        throw fail(e.what());
      }
    }
  }
  if (!steps.empty())
    throw ValueError("trajectories " + path + ": episode '" + steps_task + "' has no end record");
  return out;
}

// ---- reports ----------------------------------------------------------------

namespace {

std::string fmt_num(double x) {
  std::ostringstream out;
  out << x;
  return out.str();
}

std::string fmt_pct(double x) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(1);
  out << (100.0 * x) << "%";
  return out.str();
}

std::string truncate_text(const std::string& s, std::size_t n) {
  if (s.size() <= n) return s;
  return s.substr(0, n > 3 ? n - 3 : 0) + "...";
}

}  // namespace

std::string render_metrics_report(const std::string& csv_text) {
  struct Row {
    double step, mean_reward, entropy, kl, clip;
  };
  std::vector<Row> rows;
  std::istringstream in(csv_text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.back() == '\r') {
      while (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
    }
    if (first) {
      first = false;  // header
      continue;
    }
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(fields, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        break;
      }
    }
    if (vals.size() == 5) rows.push_back({vals[0], vals[1], vals[2], vals[3], vals[4]});
  }
  if (rows.empty()) return "Training metrics: none.\n";
  double best = rows.front().mean_reward;
  for (const Row& r : rows) best = std::max(best, r.mean_reward);
  std::ostringstream out;
  out << "Training metrics: " << rows.size() << " steps\n";
  out << "  mean reward: first " << fmt_num(rows.front().mean_reward) << ", best "
      << fmt_num(best) << ", final " << fmt_num(rows.back().mean_reward) << "\n";
  out << "  final entropy " << fmt_num(rows.back().entropy) << ", final KL "
      << fmt_num(rows.back().kl) << ", final clip fraction " << fmt_num(rows.back().clip)
      << "\n";
  return out.str();
}

std::string render_case_table(const EpisodeDump& d, int tool_total) {
  std::ostringstream out;
  out << "Case " << d.task_id << " (env " << d.env_id << ")\n";
  out << "  Outcome: " << d.terminated << ", reward " << fmt_num(d.reward) << "\n";
  std::set<std::string> used;
  for (const TrajectoryStep& s : d.steps)
    if (s.action.kind == Action::Kind::ToolCall) used.insert(s.action.tool);
  out << "  Tools Used: " << used.size() << "/"
      << (tool_total >= 0 ? std::to_string(tool_total) : "?") << "\n";
  for (std::size_t i = 0; i < d.steps.size(); ++i) {
    const TrajectoryStep& s = d.steps[i];
    out << "  " << (i + 1) << ". ";
    if (s.action.kind == Action::Kind::ToolCall) {
      out << s.action.tool << "(";
      bool first = true;
      for (const auto& [k, v] : s.action.args) {
        if (!first) out << ", ";
        first = false;
        out << k << "=" << truncate_text(canonical_dump(v, -1), 24);
      }
      out << ")";
      if (s.observation.kind == "tool_result")
        out << " -> ok";
      else if (s.observation.kind == "tool_error")
        out << " -> error: " << truncate_text(canonical_dump(s.observation.payload, -1), 48);
      else
        out << " -> " << s.observation.kind;
    } else {
      out << "respond -> " << truncate_text(canonical_dump(s.action.answer, -1), 48);
    }
    out << "\n";
  }
  return out.str();
}

// ---- verbs ------------------------------------------------------------------

namespace {

PolicyParams initial_params(const RunConfig& cfg, const VerbArgs& args) {
  if (args.policy_file.empty()) return zero_params(cfg.policy.dim, cfg.policy.temperature);
  return PolicyParams::from_value(parse_json_file(args.policy_file));
}

std::string arena_members_path(const RunConfig& cfg) {
  return (fs::path(cfg.paths.ecosystem_dir) / "arena_members.json").string();
}

std::string taxonomy_path(const RunConfig& cfg) {
  return (fs::path(cfg.paths.ecosystem_dir) / "taxonomy.json").string();
}

int verb_forge(const RunConfig& cfg) {
  std::vector<std::string> themes = cfg.forge.themes;
  if (themes.empty())
    for (const ThemeTemplate& t : builtin_themes()) themes.push_back(t.theme);

  struct Job {
    std::string theme;
    int index;
  };
  std::vector<Job> jobs;
  for (const std::string& theme : themes)
    for (int i = 0; i < cfg.forge.envs_per_theme; ++i) jobs.push_back({theme, i});

  auto make_env = [&cfg](const Job& j) -> EnvironmentBundle {
    const ThemeTemplate& tmpl = builtin_theme(j.theme);
    const std::uint64_t base = derive_seed(cfg.seed, j.theme, static_cast<std::uint64_t>(j.index));
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
      try {
        return generate_environment(tmpl, base + attempt);
      } catch (const EnvironmentRejected&) {
        continue;
      }
    }
    throw ValueError("forge: no accepted environment for theme '" + j.theme + "' after 64 attempts");
  };

  std::vector<EnvironmentBundle> envs(jobs.size());
  if (cfg.parallelism > 1) {
    std::size_t next = 0;
    while (next < jobs.size()) {
      const std::size_t end =
          std::min(jobs.size(), next + static_cast<std::size_t>(cfg.parallelism));
      std::vector<std::future<EnvironmentBundle>> futs;
      for (std::size_t i = next; i < end; ++i)
        futs.push_back(std::async(std::launch::async, make_env, jobs[i]));
      for (std::size_t i = next; i < end; ++i) envs[i] = futs[i - next].get();
      next = end;
    }
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) envs[i] = make_env(jobs[i]);
  }

  std::set<std::string> seen;
  for (const EnvironmentBundle& e : envs)
    if (!seen.insert(e.env_id).second)
      throw ValueError("forge: duplicate environment id " + e.env_id);

  std::vector<std::pair<std::string, std::vector<double>>> features;
  for (const EnvironmentBundle& e : envs) features.emplace_back(e.env_id, environment_features(e));
  std::sort(features.begin(), features.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const int n = static_cast<int>(features.size());
  const int k2 = std::min(cfg.forge.taxonomy_k2, n);
  const int k1 = std::min(cfg.forge.taxonomy_k1, k2);
  Taxonomy taxonomy = build_taxonomy(features, k2, k1);

  for (EnvironmentBundle& e : envs) {
    auto it = taxonomy.assignment.find(e.env_id);
    if (it != taxonomy.assignment.end()) {
      e.first_tier = it->second.first;
      e.second_tier = it->second.second;
    }
  }
  for (const EnvironmentBundle& e : envs) {
    save_environment_dir(e, (fs::path(cfg.paths.ecosystem_dir) / e.env_id).string());
    std::cout << "forged " << e.env_id << ": " << e.db.total_documents() << " docs, "
              << e.tools.size() << " tools, tier " << e.first_tier << "/" << e.second_tier
              << "\n";
  }
  write_text_file(taxonomy_path(cfg), dump_json(taxonomy.to_value()));
  const ArenaSet members = build_arena(taxonomy, cfg.arena.k, derive_seed(cfg.seed, "arena"));
  write_text_file(arena_members_path(cfg), dump_json(members.to_value()));
  std::cout << "taxonomy: " << envs.size() << " environments, " << taxonomy.first_tier.size()
            << " coarse / " << taxonomy.second_tier.size() << " fine categories\n";
  std::cout << "arena members:";
  for (const std::string& m : members.members) std::cout << " " << m;
  std::cout << "\n";
  return 0;
}

int verb_synth_tasks(const RunConfig& cfg) {
  const std::vector<EnvironmentBundle> envs = load_ecosystem(cfg.paths.ecosystem_dir);
  if (envs.empty()) throw ValueError("synth-tasks: ecosystem is empty; run forge first");

  std::set<std::string> held;
  if (cfg.arena.hold_out_arena && fs::exists(arena_members_path(cfg))) {
    const ArenaSet members = ArenaSet::from_value(parse_json_file(arena_members_path(cfg)));
    held.insert(members.members.begin(), members.members.end());
  }

  std::vector<TaskRecord> suite;
  int used = 0;
  int dropped = 0;
  for (const EnvironmentBundle& env : envs) {
    if (held.count(env.env_id) != 0) continue;
    ++used;
    std::vector<TaskRecord> tasks =
        synthesize_tasks(env, builtin_theme(env.theme), cfg.synth.knobs, cfg.synth.graph_per_env,
                         cfg.synth.prog_per_env, derive_seed(cfg.seed, env.env_id));
    for (TaskRecord& t : tasks) {
      if (cfg.synth.consistency_filter) {
        const ConsistencyDecision dec = consistency_filter(
            t, env, 0.0, derive_seed(cfg.seed, t.task_id), 5, 2, cfg.rollout.budget);
        if (!dec.keep) {
          ++dropped;
          continue;
        }
      }
      suite.push_back(std::move(t));
    }
  }
  if (used == 0)
    throw ValueError("synth-tasks: every environment is held out for the arena");
  save_suite(suite, cfg.suite_path());
  std::cout << "synthesized " << suite.size() << " tasks from " << used << " environments";
  if (cfg.synth.consistency_filter) std::cout << " (dropped " << dropped << " unstable)";
  std::cout << " -> " << cfg.suite_path() << "\n";
  return 0;
}

EnvMap ecosystem_map(std::vector<EnvironmentBundle>&& envs) {
  EnvMap out;
  for (EnvironmentBundle& e : envs) {
    std::string id = e.env_id;
    out.emplace(std::move(id), std::move(e));
  }
  return out;
}

int verb_rollout(const RunConfig& cfg, const VerbArgs& args) {
  const EnvMap envs = ecosystem_map(load_ecosystem(cfg.paths.ecosystem_dir));
  const std::vector<TaskRecord> tasks = load_suite(cfg.suite_path());
  if (tasks.empty()) throw ValueError("rollout: task suite is empty");
  SoftmaxPolicy policy(initial_params(cfg, args));
  const EvalResults results =
      evaluate_policy(policy, tasks, envs, cfg.rollout.budget, derive_seed(cfg.seed, "rollout"));

  std::vector<EpisodeDump> dumps;
  dumps.reserve(results.rows.size());
  for (std::size_t i = 0; i < results.rows.size(); ++i)
    dumps.push_back(episode_dump(results.traces[i], results.rows[i].env_id, results.rows[i].reward));
  save_trajectories(dumps, (fs::path(cfg.paths.output_dir) / "trajectories.jsonl").string());
  write_text_file((fs::path(cfg.paths.output_dir) / "rollout_results.json").string(),
                  dump_json(results.to_value()));
  std::cout << "rollout: " << results.rows.size() << " episodes, pass rate "
            << fmt_pct(results.pass_rate) << "\n";
  for (const auto& [env, pt] : results.per_env)
    std::cout << "  " << env << ": " << pt.first << "/" << pt.second << " passed\n";
  return 0;
}

int verb_train(const RunConfig& cfg, const VerbArgs& args) {
  const std::vector<EnvironmentBundle> envs = load_ecosystem(cfg.paths.ecosystem_dir);
  std::map<std::string, const EnvironmentBundle*> by_id;
  for (const EnvironmentBundle& e : envs) by_id[e.env_id] = &e;
  const std::vector<TaskRecord> tasks = load_suite(cfg.suite_path());
  if (tasks.empty()) throw ValueError("train: task suite is empty");
  std::vector<TrainTask> batch;
  batch.reserve(tasks.size());
  for (const TaskRecord& t : tasks) {
    auto it = by_id.find(t.env_id);
    if (it == by_id.end())
      throw NotFoundError("train: task " + t.task_id + " references unknown environment " + t.env_id,
                          t.env_id);
    batch.push_back(TrainTask{&t, it->second});
  }
  const TrainResult result =
      train(batch, initial_params(cfg, args), cfg.train, derive_seed(cfg.seed, "train"));
  std::string csv = result.metrics_csv();
  if (csv.empty() || csv.back() != '\n') csv.push_back('\n');
  write_text_file((fs::path(cfg.paths.output_dir) / "metrics.csv").string(), csv);
  write_text_file((fs::path(cfg.paths.output_dir) / "train_summary.json").string(),
                  dump_json(result.summary()));
  write_text_file((fs::path(cfg.paths.output_dir) / "policy.json").string(),
                  dump_json(result.params.to_value()));
  std::cout << "trained " << result.metrics.size() << " steps on " << batch.size()
            << " tasks; final mean reward " << fmt_num(result.final_mean_reward) << "\n";
  return 0;
}

int verb_arena(const RunConfig& cfg, const VerbArgs& args) {
  const std::vector<EnvironmentBundle> envs = load_ecosystem(cfg.paths.ecosystem_dir);
  if (!fs::exists(taxonomy_path(cfg)))
    throw NotFoundError("taxonomy.json not found (run forge first): " + taxonomy_path(cfg),
                        taxonomy_path(cfg));
  const Taxonomy taxonomy = Taxonomy::from_value(parse_json_file(taxonomy_path(cfg)));
  ArenaConfig acfg = cfg.arena;
  acfg.out_dir = cfg.paths.output_dir;
  const SelfEvolutionResult result = run_self_evolution(initial_params(cfg, args), envs, taxonomy,
                                                        acfg, cfg.arena_rounds, cfg.seed);
  write_text_file((fs::path(cfg.paths.output_dir) / "arena_policy.json").string(),
                  dump_json(result.final_params.to_value()));
  ValueObject sum;
  sum["rounds"] = Value(static_cast<std::int64_t>(result.rounds.size()));
  ValueList pre, post, weak;
  for (const ArenaRoundReport& r : result.rounds) {
    pre.push_back(Value(r.pre_pass_rate));
    post.push_back(Value(r.post_pass_rate));
    ValueList w;
    for (const std::string& e : r.diagnosis.weak_set) w.push_back(Value(e));
    weak.push_back(Value(std::move(w)));
  }
  sum["pre_pass_rates"] = Value(std::move(pre));
  sum["post_pass_rates"] = Value(std::move(post));
  sum["weak_sets"] = Value(std::move(weak));
  write_text_file((fs::path(cfg.paths.output_dir) / "arena_summary.json").string(),
                  dump_json(Value(std::move(sum))));
  for (const ArenaRoundReport& r : result.rounds) {
    std::cout << "round " << r.round << ": pre " << fmt_pct(r.pre_pass_rate) << " -> post "
              << fmt_pct(r.post_pass_rate) << ", weak set:";
    if (r.diagnosis.weak_set.empty()) std::cout << " (none)";
    for (const std::string& e : r.diagnosis.weak_set) std::cout << " " << e;
    std::cout << "\n";
  }
  return 0;
}

int verb_report(const RunConfig& cfg) {
  std::ostringstream rep;
  rep << "Run Report\n==========\n\n";

  const std::string metrics_path = (fs::path(cfg.paths.output_dir) / "metrics.csv").string();
  if (fs::exists(metrics_path))
    rep << render_metrics_report(read_text_file(metrics_path));
  else
    rep << "Training metrics: none.\n";
  rep << "\n";

  bool any_round = false;
  for (int r = 0;; ++r) {
    const std::string path =
        (fs::path(cfg.paths.output_dir) / ("arena_round_" + std::to_string(r) + ".json")).string();
    if (!fs::exists(path)) break;
    if (!any_round) rep << "Arena rounds:\n";
    any_round = true;
    const ArenaRoundReport round = ArenaRoundReport::from_value(parse_json_file(path));
    rep << "  round " << round.round << ": pre " << fmt_pct(round.pre_pass_rate) << " -> post "
        << fmt_pct(round.post_pass_rate) << ", " << round.eval_task_ids.size() << " eval / "
        << round.targeted_task_ids.size() << " targeted tasks, weak set:";
    if (round.diagnosis.weak_set.empty()) rep << " (none)";
    for (const std::string& e : round.diagnosis.weak_set) rep << " " << e;
    rep << "\n";
  }
  if (!any_round) rep << "Arena rounds: none.\n";
  rep << "\n";

  const std::string traj_path = (fs::path(cfg.paths.output_dir) / "trajectories.jsonl").string();
  if (fs::exists(traj_path)) {
    const std::vector<EpisodeDump> dumps = load_trajectories(traj_path);
    std::map<std::string, int> tool_totals;
    try {
      for (const EnvironmentBundle& e : load_ecosystem(cfg.paths.ecosystem_dir))
        tool_totals[e.env_id] = static_cast<int>(e.tools.size());
    } catch (const Error&) {
      // Case tables degrade to "k/?" when the ecosystem is unavailable.
    }
    rep << "Cases: " << dumps.size() << " episodes\n\n";
    const std::size_t shown = std::min<std::size_t>(dumps.size(), 50);
    for (std::size_t i = 0; i < shown; ++i) {
      auto it = tool_totals.find(dumps[i].env_id);
      rep << render_case_table(dumps[i], it == tool_totals.end() ? -1 : it->second) << "\n";
    }
    if (shown < dumps.size()) rep << "... and " << (dumps.size() - shown) << " more episodes\n";
  } else {
    rep << "Cases: none.\n";
  }

  const std::string text = rep.str();
  write_text_file((fs::path(cfg.paths.output_dir) / "report.txt").string(), text);
  std::cout << text;
  return 0;
}

int verb_validate(const RunConfig& cfg) {
  bool ok = true;
  if (!fs::is_directory(cfg.paths.ecosystem_dir))
    throw NotFoundError("ecosystem directory not found: " + cfg.paths.ecosystem_dir,
                        cfg.paths.ecosystem_dir);
  std::vector<std::string> bundle_dirs;
  for (const auto& entry : fs::directory_iterator(cfg.paths.ecosystem_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
      bundle_dirs.push_back(entry.path().string());
  }
  std::sort(bundle_dirs.begin(), bundle_dirs.end());
  std::set<std::string> env_ids;
  for (const std::string& dir : bundle_dirs) {
    std::cout << "bundle " << dir << ":\n";
    try {
      const Value man = parse_json_file((fs::path(dir) / "manifest.json").string());
      env_ids.insert(manifest_string(man, "env_id", dir));
      for (const ToolReport& r : audit_environment_dir(dir)) {
        std::cout << "  tool " << (r.name.empty() ? "<unnamed>" : r.name) << ": accuracy "
                  << fmt_num(r.accuracy);
        if (r.retained) {
          std::cout << " retained\n";
        } else {
          std::cout << " DROPPED (" << (r.reason.empty() ? "accuracy <= 0.5" : r.reason) << ")\n";
          ok = false;
        }
      }
    } catch (const Error& e) {
      std::cout << "  ERROR: " << e.what() << "\n";
      ok = false;
    }
  }
  if (bundle_dirs.empty()) {
    std::cout << "no bundles found under " << cfg.paths.ecosystem_dir << "\n";
    ok = false;
  }
  if (fs::exists(cfg.suite_path())) {
    try {
      const std::vector<TaskRecord> tasks = load_suite(cfg.suite_path());
      int missing = 0;
      for (const TaskRecord& t : tasks) {
        if (env_ids.count(t.env_id) == 0) {
          std::cout << "task " << t.task_id << ": unknown environment " << t.env_id << "\n";
          ok = false;
          ++missing;
        }
      }
      std::cout << "suite " << cfg.suite_path() << ": " << tasks.size() << " tasks"
                << (missing ? "" : ", all environments resolved") << "\n";
    } catch (const Error& e) {
      std::cout << "suite " << cfg.suite_path() << ": ERROR: " << e.what() << "\n";
      ok = false;
    }
  }
  std::cout << (ok ? "validation passed" : "validation FAILED") << "\n";
  return ok ? 0 : 1;
}

int verb_toolc(const VerbArgs& args) {
  if (args.bundle_dir.empty()) throw ValueError("toolc: a bundle directory is required");
  const std::vector<ToolReport> reports = audit_environment_dir(args.bundle_dir);
  std::size_t retained = 0;
  for (const ToolReport& r : reports) {
    std::cout << (r.retained ? "retained " : "dropped  ")
              << (r.name.empty() ? "<unnamed>" : r.name) << ": parsed=" << (r.parsed ? "yes" : "no")
              << " checked=" << (r.checked ? "yes" : "no") << " accuracy=" << fmt_num(r.accuracy);
    if (!r.reason.empty()) std::cout << " (" << r.reason << ")";
    std::cout << "\n";
    if (r.retained) ++retained;
  }
  std::cout << "retained " << retained << "/" << reports.size() << " tools\n";
  return retained == reports.size() ? 0 : 1;
}

}  // namespace

int run_command(const std::string& verb, RunConfig cfg, const VerbArgs& args) {
  try {
    if (verb == "arena") {
      if (args.rounds) {
        if (*args.rounds < 1) cfg_fail("--rounds", "must be >= 1");
        cfg.arena_rounds = *args.rounds;
      }
      if (args.k) {
        if (*args.k < 1) cfg_fail("--k", "must be >= 1");
        cfg.arena.k = *args.k;
      }
      if (args.per_env) {
        if (*args.per_env < 1) cfg_fail("--per-env", "must be >= 1");
        cfg.arena.per_env_graph = *args.per_env;
      }
    }
    if (verb != "toolc") {
      fs::create_directories(cfg.paths.output_dir);
      write_text_file((fs::path(cfg.paths.output_dir) / "effective_config.json").string(),
                      dump_json(cfg.to_value()));
    }
    if (verb == "forge") return verb_forge(cfg);
    if (verb == "synth-tasks") return verb_synth_tasks(cfg);
    if (verb == "rollout") return verb_rollout(cfg, args);
    if (verb == "train") return verb_train(cfg, args);
    if (verb == "arena") return verb_arena(cfg, args);
    if (verb == "report") return verb_report(cfg);
    if (verb == "validate") return verb_validate(cfg);
    if (verb == "toolc") return verb_toolc(args);
    throw ValueError("unknown verb: " + verb);
  } catch (const std::exception& e) {
    std::cerr << "arena " << verb << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace arena
