#pragma once

// Document database: named collections of ordered object documents, each with
// a unique string `id`, plus a per-collection schema of (field, kind,
// required) descriptors. Collections are ordered lists so iteration, grounding
// and pagination-style tools are reproducible.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "arena/value.hpp"

namespace arena {

struct FieldDesc {
  std::string name;
  Kind kind = Kind::Null;
  bool required = false;

  bool operator==(const FieldDesc&) const = default;
};

using CollectionSchema = std::vector<FieldDesc>;

struct Database {
  // collection name -> ordered documents (each an object Value with "id").
  std::map<std::string, ValueList> collections;
  std::map<std::string, CollectionSchema> schema;

  bool operator==(const Database&) const = default;

  bool has_collection(const std::string& name) const { return collections.count(name) > 0; }
  const ValueList& collection(const std::string& name) const;
  ValueList& collection(const std::string& name);

  // nullptr when the field is not declared for the collection.
  const FieldDesc* field_desc(const std::string& coll, const std::string& field) const;

  // Index of the document with the given id, or nullopt.
  std::optional<std::size_t> find_doc(const std::string& coll, const std::string& id) const;

  std::size_t total_documents() const;

  Value to_value() const;  // {"collections": {...}, "schema": {...}}
  static Database from_value(const Value& v);
};

// Throws ValueError describing the first violation: empty collection names,
// missing/duplicate/non-string ids, schema conformance (required fields
// present, declared kinds respected; null allowed only for optional fields).
void validate_database(const Database& db);

// Checks one document against a collection schema; returns an error message
// or empty string. Used by validate_database and by the interpreter's write
// statements so mutations cannot corrupt the database.
std::string document_schema_error(const Value& doc, const CollectionSchema& schema);

// Value-semantics deep copy with an integrity digest over the canonical
// serialization. Snapshots are immutable and safe to share across threads.
struct Snapshot {
  Database db;
  std::uint64_t digest = 0;
};

Snapshot snapshot_database(const Database& db);
// Verifies the digest before handing the copy back; a tampered snapshot
// raises an integrity ValueError.
Database restore_database(const Snapshot& snap);

// Path grammar: `collection(.segment)*` where each segment indexes a list
// (decimal integer) or selects an object field, driven by the shape of the
// value under traversal. Example: "orders.2.items.0.price".
Value query_path(const Database& db, const std::string& path);

std::vector<std::string> split_path(const std::string& path);

// Resolves a dotted path inside a single value ("" addresses the root).
// Returns nullptr when any segment fails to resolve.
const Value* resolve_value_path(const Value& root, const std::string& path);

std::string database_dump(const Database& db);  // canonical, for byte-equality tests

}  // namespace arena
