#include <algorithm>
#include <cmath>
#include <cstdio>

#include "arena/forge.hpp"

namespace arena {

namespace {

const Value& need(const Value& v, const char* key) {
  const Value* f = v.find(key);
  if (!f) throw ValueError(std::string("missing field '") + key + "'");
  return *f;
}

std::string need_string(const Value& v, const char* key) {
  const Value& f = need(v, key);
  if (f.kind() != Kind::String) throw ValueError(std::string("field '") + key + "' must be a string");
  return f.as_string();
}

std::int64_t opt_int(const Value& v, const char* key, std::int64_t dflt) {
  const Value* f = v.find(key);
  if (!f) return dflt;
  if (f->kind() != Kind::Int) throw ValueError(std::string("field '") + key + "' must be an int");
  return f->as_int();
}

double opt_float(const Value& v, const char* key, double dflt) {
  const Value* f = v.find(key);
  if (!f) return dflt;
  if (f->kind() == Kind::Int) return static_cast<double>(f->as_int());
  if (f->kind() != Kind::Float) throw ValueError(std::string("field '") + key + "' must be a number");
  return f->as_float();
}

std::string opt_string(const Value& v, const char* key, const std::string& dflt) {
  const Value* f = v.find(key);
  if (!f) return dflt;
  return f->as_string();
}

Value strings_to_value(const std::vector<std::string>& xs) {
  ValueList out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(Value(s));
  return Value(std::move(out));
}

std::vector<std::string> value_to_strings(const Value& v) {
  std::vector<std::string> out;
  for (const auto& x : v.as_list()) out.push_back(x.as_string());
  return out;
}

double round_to(double x, int decimals) {
  double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

std::string pick_doc_id(Rng& rng, const Database& db, const std::string& coll) {
  const ValueList& docs = db.collection(coll);
  if (docs.empty()) throw ValueError("cannot sample an id from empty collection '" + coll + "'");
  const Value& doc = docs[static_cast<std::size_t>(rng.bounded(static_cast<std::int64_t>(docs.size())))];
  return doc.find("id")->as_string();
}

}  // namespace

// ---------------------------------------------------------------------------
// Field generators

Value FieldGen::to_value() const {
  ValueObject o;
  o["kind"] = Value(kind);
  if (!choices.empty()) o["choices"] = Value(ValueList(choices.begin(), choices.end()));
  if (lo != 0 || hi != 0) {
    o["lo"] = Value(lo);
    o["hi"] = Value(hi);
  }
  if (flo != 0.0 || fhi != 0.0) {
    o["flo"] = Value(flo);
    o["fhi"] = Value(fhi);
  }
  if (decimals != 2) o["decimals"] = Value(static_cast<std::int64_t>(decimals));
  if (p != 0.5) o["p"] = Value(p);
  if (!fk_collection.empty()) o["fk_collection"] = Value(fk_collection);
  if (!(const_value == Value())) o["const_value"] = const_value;
  return Value(std::move(o));
}

FieldGen FieldGen::from_value(const Value& v) {
  FieldGen g;
  g.kind = need_string(v, "kind");
  if (const Value* c = v.find("choices")) g.choices = c->as_list();
  g.lo = opt_int(v, "lo", 0);
  g.hi = opt_int(v, "hi", 0);
  g.flo = opt_float(v, "flo", 0.0);
  g.fhi = opt_float(v, "fhi", 0.0);
  g.decimals = static_cast<int>(opt_int(v, "decimals", 2));
  g.p = opt_float(v, "p", 0.5);
  g.fk_collection = opt_string(v, "fk_collection", "");
  if (const Value* c = v.find("const_value")) g.const_value = *c;
  return g;
}

namespace {

Value generate_field_value(const FieldGen& g, Rng& rng, const Database& partial) {
  if (g.kind == "choice") return rng.pick(g.choices);
  if (g.kind == "int_range") return Value(rng.range(g.lo, g.hi));
  if (g.kind == "float_range")
    return Value(round_to(g.flo + rng.next_unit() * (g.fhi - g.flo), g.decimals));
  if (g.kind == "word_pair") {
    const Value& a = rng.pick(g.choices);
    const Value& b = rng.pick(g.choices);
    return Value(a.as_string() + " " + b.as_string());
  }
  if (g.kind == "date") {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "2026-%02d-%02d", static_cast<int>(rng.range(1, 12)),
                  static_cast<int>(rng.range(1, 28)));
    return Value(std::string(buf));
  }
  if (g.kind == "bool_p") return Value(rng.bernoulli(g.p));
  if (g.kind == "fk") return Value(pick_doc_id(rng, partial, g.fk_collection));
  if (g.kind == "list_choice") {
    std::int64_t k = rng.range(g.lo, g.hi);
    ValueList out;
    for (std::int64_t i = 0; i < k; ++i) {
      const Value& c = rng.pick(g.choices);
      bool seen = false;
      for (const auto& x : out)
        if (x == c) seen = true;
      if (!seen) out.push_back(c);
    }
    return Value(std::move(out));
  }
  if (g.kind == "const") return g.const_value;
  throw ValueError("unknown field generator '" + g.kind + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs

Value FieldSpec::to_value() const {
  ValueObject o;
  o["name"] = Value(name);
  o["kind"] = Value(std::string(kind_name(kind)));
  o["required"] = Value(required);
  o["gen"] = gen.to_value();
  return Value(std::move(o));
}

FieldSpec FieldSpec::from_value(const Value& v) {
  FieldSpec f;
  f.name = need_string(v, "name");
  f.kind = kind_from_name(need_string(v, "kind"));
  f.required = need(v, "required").as_bool();
  f.gen = FieldGen::from_value(need(v, "gen"));
  return f;
}

Value CollectionSpec::to_value() const {
  ValueObject o;
  o["name"] = Value(name);
  o["id_prefix"] = Value(id_prefix);
  o["min_docs"] = Value(min_docs);
  o["max_docs"] = Value(max_docs);
  ValueList fs;
  fs.reserve(fields.size());
  for (const auto& f : fields) fs.push_back(f.to_value());
  o["fields"] = Value(std::move(fs));
  return Value(std::move(o));
}

CollectionSpec CollectionSpec::from_value(const Value& v) {
  CollectionSpec c;
  c.name = need_string(v, "name");
  c.id_prefix = need_string(v, "id_prefix");
  c.min_docs = need(v, "min_docs").as_int();
  c.max_docs = need(v, "max_docs").as_int();
  for (const auto& f : need(v, "fields").as_list()) c.fields.push_back(FieldSpec::from_value(f));
  return c;
}

Value ArgSampler::sample(Rng& rng, const Database& db) const {
  if (kind == "doc_id") return Value(pick_doc_id(rng, db, collection));
  if (kind == "choice") return rng.pick(choices);
  if (kind == "int_range") return Value(rng.range(lo, hi));
  if (kind == "float_range") return Value(round_to(flo + rng.next_unit() * (fhi - flo), decimals));
  throw ValueError("unknown arg sampler '" + kind + "'");
}

Value ArgSampler::to_value() const {
  ValueObject o;
  o["kind"] = Value(kind);
  if (!collection.empty()) o["collection"] = Value(collection);
  if (!choices.empty()) o["choices"] = Value(ValueList(choices.begin(), choices.end()));
  if (lo != 0 || hi != 0) {
    o["lo"] = Value(lo);
    o["hi"] = Value(hi);
  }
  if (flo != 0.0 || fhi != 0.0) {
    o["flo"] = Value(flo);
    o["fhi"] = Value(fhi);
  }
  if (decimals != 2) o["decimals"] = Value(static_cast<std::int64_t>(decimals));
  return Value(std::move(o));
}

ArgSampler ArgSampler::from_value(const Value& v) {
  ArgSampler s;
  s.kind = need_string(v, "kind");
  s.collection = opt_string(v, "collection", "");
  if (const Value* c = v.find("choices")) s.choices = c->as_list();
  s.lo = opt_int(v, "lo", 0);
  s.hi = opt_int(v, "hi", 0);
  s.flo = opt_float(v, "flo", 0.0);
  s.fhi = opt_float(v, "fhi", 0.0);
  s.decimals = static_cast<int>(opt_int(v, "decimals", 2));
  return s;
}

Value MutationSpec::to_value() const {
  ValueObject o;
  o["tool"] = Value(tool);
  o["collection"] = Value(collection);
  o["id_param"] = Value(id_param);
  ValueObject sv(sets.begin(), sets.end());
  o["sets"] = Value(std::move(sv));
  return Value(std::move(o));
}

MutationSpec MutationSpec::from_value(const Value& v) {
  MutationSpec m;
  m.tool = need_string(v, "tool");
  m.collection = need_string(v, "collection");
  m.id_param = need_string(v, "id_param");
  for (const auto& [k, val] : need(v, "sets").as_object()) m.sets[k] = val;
  return m;
}

Value ToolSpec::to_value() const {
  ValueObject o;
  o["source"] = Value(source);
  ValueObject sm;
  for (const auto& [k, s] : samplers) sm[k] = s.to_value();
  o["samplers"] = Value(std::move(sm));
  o["intent"] = Value(intent);
  o["pronoun_intent"] = Value(pronoun_intent);
  o["unit_cases"] = Value(static_cast<std::int64_t>(unit_cases));
  return Value(std::move(o));
}

ToolSpec ToolSpec::from_value(const Value& v) {
  ToolSpec t;
  t.source = need_string(v, "source");
  for (const auto& [k, s] : need(v, "samplers").as_object())
    t.samplers[k] = ArgSampler::from_value(s);
  t.intent = need_string(v, "intent");
  t.pronoun_intent = need_string(v, "pronoun_intent");
  t.unit_cases = static_cast<int>(opt_int(v, "unit_cases", 3));
  return t;
}

Value DescriptionBank::to_value() const {
  ValueObject o;
  o["openers"] = strings_to_value(openers);
  o["vague_openers"] = strings_to_value(vague_openers);
  o["connectors"] = strings_to_value(connectors);
  return Value(std::move(o));
}

DescriptionBank DescriptionBank::from_value(const Value& v) {
  DescriptionBank b;
  b.openers = value_to_strings(need(v, "openers"));
  b.vague_openers = value_to_strings(need(v, "vague_openers"));
  b.connectors = value_to_strings(need(v, "connectors"));
  return b;
}

Value ThemeTemplate::to_value() const {
  ValueObject o;
  o["theme"] = Value(theme);
  ValueList cs;
  for (const auto& c : collections) cs.push_back(c.to_value());
  o["collections"] = Value(std::move(cs));
  ValueList ts;
  for (const auto& t : tools) ts.push_back(t.to_value());
  o["tools"] = Value(std::move(ts));
  ValueList ms;
  for (const auto& m : mutations) ms.push_back(m.to_value());
  o["mutations"] = Value(std::move(ms));
  o["bank"] = bank.to_value();
  ValueList fv;
  for (double x : feature_vector) fv.push_back(Value(x));
  o["feature_vector"] = Value(std::move(fv));
  return Value(std::move(o));
}

ThemeTemplate ThemeTemplate::from_value(const Value& v) {
  ThemeTemplate t;
  t.theme = need_string(v, "theme");
  for (const auto& c : need(v, "collections").as_list())
    t.collections.push_back(CollectionSpec::from_value(c));
  for (const auto& s : need(v, "tools").as_list()) t.tools.push_back(ToolSpec::from_value(s));
  for (const auto& m : need(v, "mutations").as_list())
    t.mutations.push_back(MutationSpec::from_value(m));
  t.bank = DescriptionBank::from_value(need(v, "bank"));
  for (const auto& x : need(v, "feature_vector").as_list()) t.feature_vector.push_back(x.as_float());
  return t;
}

const ThemeTemplate& builtin_theme(const std::string& name) {
  for (const auto& t : builtin_themes())
    if (t.theme == name) return t;
  throw ValueError("unknown theme '" + name + "'");
}

// ---------------------------------------------------------------------------
// Environment generation

namespace {

Database generate_database(const ThemeTemplate& tmpl, std::uint64_t seed) {
  Database db;
  for (std::size_t ci = 0; ci < tmpl.collections.size(); ++ci) {
    const CollectionSpec& spec = tmpl.collections[ci];
    CollectionSchema schema;
    schema.push_back({"id", Kind::String, true});
    for (const auto& f : spec.fields) schema.push_back({f.name, f.kind, f.required});
    db.schema[spec.name] = schema;

    Rng rng(derive_seed(seed, "coll", ci));
    std::int64_t n = rng.range(spec.min_docs, spec.max_docs);
    ValueList docs;
    for (std::int64_t j = 0; j < n; ++j) {
      ValueObject doc;
      doc["id"] = Value(spec.id_prefix + std::to_string(j + 1));
      for (const auto& f : spec.fields) doc[f.name] = generate_field_value(f.gen, rng, db);
      docs.push_back(Value(std::move(doc)));
    }
    db.collections[spec.name] = std::move(docs);
  }
  validate_database(db);
  return db;
}

std::vector<ToolCandidate> generate_candidates(const ThemeTemplate& tmpl, const Database& db,
                                               std::uint64_t seed) {
  std::vector<ToolCandidate> cands;
  for (std::size_t ti = 0; ti < tmpl.tools.size(); ++ti) {
    const ToolSpec& spec = tmpl.tools[ti];
    ToolCandidate cand;
    cand.source = spec.source;
    ProgramPtr prog;
    try {
      prog = parse_program(spec.source);
    } catch (const ParseError&) {
      cands.push_back(std::move(cand));  // no cases; the filter reports it
      continue;
    }
    Rng rng(derive_seed(seed, "cases", ti));
    for (int k = 0; k < spec.unit_cases; ++k) {
      for (int attempt = 0; attempt < 10; ++attempt) {
        ValueObject args;
        bool sampled = true;
        for (const auto& ps : prog->sig.params) {
          auto it = spec.samplers.find(ps.name);
          if (it == spec.samplers.end()) {
            if (ps.required) sampled = false;
            continue;
          }
          if (!ps.required && !rng.bernoulli(0.5)) continue;  // sometimes omit optionals
          args[ps.name] = it->second.sample(rng, db);
        }
        if (!sampled) break;
        EvalOutcome out = evaluate_program(*prog, db, args);
        if (!out.ok) continue;
        UnitCase uc;
        uc.args = std::move(args);
        uc.expect_value = out.value;
        uc.expect_writes = out.writes;  // empty for pure readers, by design
        cand.cases.push_back(std::move(uc));
        break;
      }
    }
    cands.push_back(std::move(cand));
  }
  return cands;
}

}  // namespace

EnvironmentBundle generate_environment(const ThemeTemplate& tmpl, std::uint64_t seed) {
  EnvironmentBundle b;
  b.env_id = tmpl.theme + "-s" + std::to_string(seed);
  b.theme = tmpl.theme;
  b.db = generate_database(tmpl, seed);
  FilterResult fr = filter_toolset(generate_candidates(tmpl, b.db, seed), b.db);
  b.tools = std::move(fr.retained);
  b.reports = std::move(fr.reports);
  return b;
}

void refresh_unit_cases(EnvironmentBundle& bundle, const ThemeTemplate& tmpl, std::uint64_t seed) {
  FilterResult fr = filter_toolset(generate_candidates(tmpl, bundle.db, seed), bundle.db);
  bundle.tools = std::move(fr.retained);
  bundle.reports = std::move(fr.reports);
}

const CheckedTool* EnvironmentBundle::find_tool(const std::string& name) const {
  for (const auto& t : tools)
    if (t.sig().name == name) return &t;
  return nullptr;
}

Value EnvironmentBundle::to_value() const {
  ValueObject o;
  o["env_id"] = Value(env_id);
  o["theme"] = Value(theme);
  ValueObject tax;
  tax["first_tier"] = Value(first_tier);
  tax["second_tier"] = Value(second_tier);
  o["taxonomy"] = Value(std::move(tax));
  o["database"] = db.to_value();
  ValueList ts;
  for (const auto& t : tools) {
    ValueObject tv;
    tv["source"] = Value(print_program(*t.program));
    ValueList cs;
    for (const auto& c : t.cases) cs.push_back(c.to_value());
    tv["cases"] = Value(std::move(cs));
    ts.push_back(Value(std::move(tv)));
  }
  o["tools"] = Value(std::move(ts));
  return Value(std::move(o));
}

EnvironmentBundle EnvironmentBundle::from_value(const Value& v) {
  EnvironmentBundle b;
  b.env_id = need_string(v, "env_id");
  b.theme = need_string(v, "theme");
  const Value& tax = need(v, "taxonomy");
  b.first_tier = need_string(tax, "first_tier");
  b.second_tier = need_string(tax, "second_tier");
  b.db = Database::from_value(need(v, "database"));
  for (const auto& tv : need(v, "tools").as_list()) {
    CheckedTool tool;
    tool.program = parse_program(need_string(tv, "source"));
    tool.shape = check_program(*tool.program, &b.db);
    for (const auto& c : need(tv, "cases").as_list()) tool.cases.push_back(UnitCase::from_value(c));
    b.tools.push_back(std::move(tool));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Complexification

Value ComplexifyKnobs::to_value() const {
  ValueObject o;
  o["rounds"] = Value(rounds);
  o["add_records"] = Value(add_records);
  o["add_fields"] = Value(add_fields);
  o["add_linked_collection_prob"] = Value(add_linked_collection_prob);
  return Value(std::move(o));
}

ComplexifyKnobs ComplexifyKnobs::from_value(const Value& v) {
  ComplexifyKnobs k;
  k.rounds = opt_int(v, "rounds", 0);
  k.add_records = opt_int(v, "add_records", 0);
  k.add_fields = opt_int(v, "add_fields", 0);
  k.add_linked_collection_prob = opt_float(v, "add_linked_collection_prob", 0.0);
  if (k.rounds < 0 || k.add_records < 0 || k.add_fields < 0 ||
      k.add_linked_collection_prob < 0.0 || k.add_linked_collection_prob > 1.0)
    throw ValueError("complexify knobs out of range");
  return k;
}

namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "amber", "basalt", "cedar",  "dune",   "ember",  "fjord",  "garnet", "harbor",
      "indigo", "juniper", "krill", "lumen",  "mesa",   "nectar", "onyx",   "prairie",
      "quartz", "reef",    "sable", "tundra", "umber",  "vale",   "willow", "zephyr"};
  return words;
}

// Generic value for a complexify-added record, driven by the field's kind.
// Reference-style string fields ("<stem>_ref") get a valid id from the stem's
// collection when one exists.
Value generic_value(const FieldDesc& fd, Rng& rng, const Database& db) {
  if (fd.kind == Kind::String) {
    const std::string suffix = "_ref";
    if (fd.name.size() > suffix.size() &&
        fd.name.compare(fd.name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      std::string stem = fd.name.substr(0, fd.name.size() - suffix.size());
      std::string target;
      if (db.has_collection(stem)) target = stem;
      else if (db.has_collection(stem + "s")) target = stem + "s";
      if (!target.empty() && !db.collection(target).empty())
        return Value(pick_doc_id(rng, db, target));
    }
    return Value(rng.pick(filler_words()));
  }
  switch (fd.kind) {
    case Kind::Int: return Value(rng.range(0, 99));
    case Kind::Float: return Value(round_to(rng.next_unit() * 100.0, 1));
    case Kind::Bool: return Value(rng.bernoulli(0.5));
    case Kind::List: return Value(ValueList{Value(rng.pick(filler_words()))});
    case Kind::Object: return Value(ValueObject{});
    default: return Value();
  }
}

}  // namespace

Database complexify_round(const Database& db, const ComplexifyKnobs& knobs, std::uint64_t seed) {
  Database out = db;
  Rng rng(derive_seed(seed, "grow"));
  std::vector<std::string> names;
  for (const auto& [name, _] : out.collections) names.push_back(name);

  for (const auto& name : names) {
    const CollectionSchema& schema = out.schema.at(name);
    ValueList& docs = out.collections.at(name);
    for (std::int64_t r = 0; r < knobs.add_records; ++r) {
      ValueObject doc;
      doc["id"] = Value(name + "_x" + std::to_string(docs.size()));
      for (const auto& fd : schema) {
        if (fd.name == "id") continue;
        doc[fd.name] = generic_value(fd, rng, out);
      }
      docs.push_back(Value(std::move(doc)));
    }
  }

  for (const auto& name : names) {
    CollectionSchema& schema = out.schema.at(name);
    for (std::int64_t f = 0; f < knobs.add_fields; ++f) {
      FieldDesc fd;
      fd.name = name + "_extra" + std::to_string(schema.size());
      static const Kind kinds[] = {Kind::Int, Kind::String, Kind::Bool, Kind::Float};
      fd.kind = kinds[rng.bounded(4)];
      fd.required = false;
      schema.push_back(fd);
      for (auto& doc : out.collections.at(name)) {
        ValueObject o = doc.as_object();
        o[fd.name] = generic_value(fd, rng, out);
        doc = Value(std::move(o));
      }
    }
  }

  if (rng.bernoulli(knobs.add_linked_collection_prob) && !names.empty()) {
    const std::string& base = rng.pick(names);
    std::string lname = base + "_links" + std::to_string(out.collections.size());
    std::string ref_field = base + "_ref";
    out.schema[lname] = {
        {"id", Kind::String, true}, {ref_field, Kind::String, true}, {"note", Kind::String, true}};
    ValueList docs;
    std::int64_t m = std::max<std::int64_t>(2, knobs.add_records);
    for (std::int64_t i = 0; i < m; ++i) {
      ValueObject doc;
      doc["id"] = Value(lname + "_r" + std::to_string(i + 1));
      doc[ref_field] = out.collection(base).empty() ? Value(std::string("none"))
                                                    : Value(pick_doc_id(rng, out, base));
      doc["note"] = Value(rng.pick(filler_words()));
      docs.push_back(Value(std::move(doc)));
    }
    out.collections[lname] = std::move(docs);
  }

  validate_database(out);
  return out;
}

Database complexify_database(const Database& db, const ComplexifyKnobs& knobs, std::uint64_t seed) {
  Database out = db;
  for (std::int64_t r = 0; r < knobs.rounds; ++r)
    out = complexify_round(out, knobs, derive_seed(seed, "cx", static_cast<std::uint64_t>(r)));
  return out;
}

// ---------------------------------------------------------------------------
// Feature vectors

std::vector<double> environment_features(const EnvironmentBundle& bundle) {
  const auto& themes = builtin_themes();
  std::vector<double> fv(themes.size(), 0.0);
  for (std::size_t i = 0; i < themes.size(); ++i)
    if (themes[i].theme == bundle.theme) fv[i] = 1.0;

  double n_coll = static_cast<double>(bundle.db.collections.size());
  double n_tools = static_cast<double>(bundle.tools.size());
  double writers = 0.0, params = 0.0, strong_out = 0.0;
  std::map<std::string, bool> schema_names;
  for (const auto& [_, schema] : bundle.db.schema)
    for (const auto& fd : schema) schema_names[fd.name] = true;
  for (const auto& t : bundle.tools) {
    if (!t.sig().writes.empty()) writers += 1.0;
    params += static_cast<double>(t.sig().params.size());
    bool has_fresh_field = false;
    for (const auto& [fname, _] : t.shape.fields)
      if (!schema_names.count(fname)) has_fresh_field = true;
    if (has_fresh_field) strong_out += 1.0;
  }
  double fields = 0.0, depth = 0.0, field_count = 0.0;
  for (const auto& [_, schema] : bundle.db.schema) {
    fields += static_cast<double>(schema.size());
    for (const auto& fd : schema) {
      depth += (fd.kind == Kind::List || fd.kind == Kind::Object) ? 2.0 : 1.0;
      field_count += 1.0;
    }
  }

  fv.push_back(n_coll);
  fv.push_back(n_tools);
  fv.push_back(n_tools > 0 ? writers / n_tools : 0.0);
  fv.push_back(n_coll > 0 ? fields / n_coll : 0.0);
  fv.push_back(n_tools > 0 ? params / n_tools : 0.0);
  fv.push_back(static_cast<double>(bundle.db.total_documents()) / 32.0);
  fv.push_back(field_count > 0 ? depth / field_count : 0.0);
  fv.push_back(n_tools > 0 ? strong_out / n_tools : 0.0);
  return fv;
}

}  // namespace arena
