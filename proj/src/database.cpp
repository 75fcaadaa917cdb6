#include "arena/database.hpp"

#include <set>

namespace arena {

const ValueList& Database::collection(const std::string& name) const {
  auto it = collections.find(name);
  if (it == collections.end()) throw NotFoundError("unknown collection: " + name, name);
  return it->second;
}

ValueList& Database::collection(const std::string& name) {
  auto it = collections.find(name);
  if (it == collections.end()) throw NotFoundError("unknown collection: " + name, name);
  return it->second;
}

const FieldDesc* Database::field_desc(const std::string& coll, const std::string& field) const {
  auto it = schema.find(coll);
  if (it == schema.end()) return nullptr;
  for (const auto& fd : it->second) {
    if (fd.name == field) return &fd;
  }
  return nullptr;
}

std::optional<std::size_t> Database::find_doc(const std::string& coll,
                                              const std::string& id) const {
  auto it = collections.find(coll);
  if (it == collections.end()) return std::nullopt;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    const Value* vid = it->second[i].find("id");
    if (vid && vid->is_string() && vid->as_string() == id) return i;
  }
  return std::nullopt;
}

std::size_t Database::total_documents() const {
  std::size_t n = 0;
  for (const auto& [_, docs] : collections) n += docs.size();
  return n;
}

Value Database::to_value() const {
  ValueObject colls;
  for (const auto& [name, docs] : collections) colls.emplace(name, Value(docs));
  ValueObject sch;
  for (const auto& [name, fields] : schema) {
    ValueList fl;
    for (const auto& fd : fields) {
      fl.push_back(Value(ValueObject{{"name", Value(fd.name)},
                                     {"kind", Value(std::string(kind_name(fd.kind)))},
                                     {"required", Value(fd.required)}}));
    }
    sch.emplace(name, Value(std::move(fl)));
  }
  return Value(ValueObject{{"collections", Value(std::move(colls))}, {"schema", Value(std::move(sch))}});
}

Database Database::from_value(const Value& v) {
  Database db;
  const Value* colls = v.find("collections");
  if (!colls || !colls->is_object()) throw ValueError("database value missing collections object");
  for (const auto& [name, docs] : colls->as_object()) {
    if (!docs.is_list()) throw ValueError("collection " + name + " is not a list");
    db.collections[name] = docs.as_list();
  }
  if (const Value* sch = v.find("schema"); sch && sch->is_object()) {
    for (const auto& [name, fields] : sch->as_object()) {
      CollectionSchema cs;
      for (const auto& f : fields.as_list()) {
        FieldDesc fd;
        fd.name = f.find("name")->as_string();
        fd.kind = kind_from_name(f.find("kind")->as_string());
        fd.required = f.find("required")->as_bool();
        cs.push_back(fd);
      }
      db.schema[name] = std::move(cs);
    }
  }
  return db;
}

std::string document_schema_error(const Value& doc, const CollectionSchema& schema) {
  if (!doc.is_object()) return "document is not an object";
  const Value* id = doc.find("id");
  if (!id) return "document missing id";
  if (!id->is_string()) return "document id is not a string";
  for (const auto& fd : schema) {
    const Value* v = doc.find(fd.name);
    if (!v) {
      if (fd.required) return "missing required field " + fd.name;
      continue;
    }
    if (v->is_null() && !fd.required) continue;
    if (v->kind() != fd.kind) {
      return "field " + fd.name + " expected " + kind_name(fd.kind) + ", got " +
             kind_name(v->kind());
    }
  }
  return "";
}

void validate_database(const Database& db) {
  for (const auto& [name, docs] : db.collections) {
    if (name.empty()) throw ValueError("empty collection name");
    std::set<std::string> ids;
    auto sit = db.schema.find(name);
    static const CollectionSchema kEmpty;
    const CollectionSchema& cs = sit == db.schema.end() ? kEmpty : sit->second;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      std::string err = document_schema_error(docs[i], cs);
      if (!err.empty()) {
        throw ValueError("collection " + name + " doc " + std::to_string(i) + ": " + err);
      }
      const std::string& id = docs[i].find("id")->as_string();
      if (!ids.insert(id).second) {
        throw ValueError("collection " + name + ": duplicate id " + id);
      }
    }
  }
}

Snapshot snapshot_database(const Database& db) {
  Snapshot s;
  s.db = db;
  s.digest = value_digest(db.to_value());
  return s;
}

Database restore_database(const Snapshot& snap) {
  if (value_digest(snap.db.to_value()) != snap.digest) {
    throw ValueError("snapshot integrity check failed");
  }
  return snap.db;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> segs;
  std::string cur;
  for (char c : path) {
    if (c == '.') {
      segs.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  segs.push_back(cur);
  return segs;
}

namespace {

bool parse_index(const std::string& seg, std::size_t& out) {
  if (seg.empty()) return false;
  std::size_t v = 0;
  for (char c : seg) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  out = v;
  return true;
}

const Value* descend(const Value* cur, const std::vector<std::string>& segs, std::size_t from,
                     const std::string* fail_seg_out) {
  (void)fail_seg_out;
  for (std::size_t i = from; i < segs.size(); ++i) {
    const std::string& seg = segs[i];
    if (cur->is_list()) {
      std::size_t idx;
      if (!parse_index(seg, idx) || idx >= cur->as_list().size()) return nullptr;
      cur = &cur->as_list()[idx];
    } else if (cur->is_object()) {
      const Value* next = cur->find(seg);
      if (!next) return nullptr;
      cur = next;
    } else {
      return nullptr;
    }
  }
  return cur;
}

}  // namespace

Value query_path(const Database& db, const std::string& path) {
  auto segs = split_path(path);
  if (segs.empty() || segs[0].empty()) throw NotFoundError("empty path", "");
  auto it = db.collections.find(segs[0]);
  if (it == db.collections.end()) {
    throw NotFoundError("not found: " + segs[0], segs[0]);
  }
  Value root(it->second);
  const Value* cur = &root;
  for (std::size_t i = 1; i < segs.size(); ++i) {
    const Value* next = descend(cur, {segs[i]}, 0, nullptr);
    if (!next) throw NotFoundError("not found at segment: " + segs[i], segs[i]);
    cur = next;
  }
  return *cur;
}

const Value* resolve_value_path(const Value& root, const std::string& path) {
  if (path.empty()) return &root;
  auto segs = split_path(path);
  return descend(&root, segs, 0, nullptr);
}

std::string database_dump(const Database& db) { return canonical_dump(db.to_value()); }

}  // namespace arena
