#pragma once

// The single value model shared by databases, tool programs, observations,
// answers and rubrics: null | bool | int64 | double | string | list | object.
// Integers and floats are distinct kinds (1 != 1.0 here; numeric-tolerance
// comparison lives in the rubric checker, which owns cross-kind logic).
// NaN and infinities are rejected at construction so every stored value
// serializes and compares totally.
//
// Canonical serialization: JSON text with object keys sorted (std::map
// iteration order), floats printed as the shortest round-trip decimal with a
// guaranteed '.' or exponent so the kind survives a parse, and no locale
// dependence. Byte-equality of canonical dumps is used as the equality oracle
// for snapshots and on-disk artifacts.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace arena {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for non-finite floats, malformed documents, bad schema kinds, etc.
struct ValueError : Error {
  using Error::Error;
};

// Raised by path queries; carries the first path segment that failed.
struct NotFoundError : Error {
  NotFoundError(const std::string& msg, std::string seg) : Error(msg), segment(std::move(seg)) {}
  std::string segment;
};

enum class Kind { Null, Bool, Int, Float, String, List, Object };

const char* kind_name(Kind k);
// Accepts the names printed by kind_name plus "any"; throws ValueError otherwise.
Kind kind_from_name(const std::string& name, bool* is_any = nullptr);

class Value;
using ValueList = std::vector<Value>;
using ValueObject = std::map<std::string, Value>;

class Value {
 public:
  Value() : v_(std::monostate{}) {}
  Value(std::nullptr_t) : v_(std::monostate{}) {}
  Value(bool b) : v_(b) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(std::int64_t i) : v_(i) {}
  Value(double d);  // throws ValueError on NaN/Inf
  Value(const char* s) : v_(std::string(s)) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(ValueList l) : v_(std::move(l)) {}
  Value(ValueObject o) : v_(std::move(o)) {}

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_null() const { return kind() == Kind::Null; }
  bool is_bool() const { return kind() == Kind::Bool; }
  bool is_int() const { return kind() == Kind::Int; }
  bool is_float() const { return kind() == Kind::Float; }
  bool is_number() const { return is_int() || is_float(); }
  bool is_string() const { return kind() == Kind::String; }
  bool is_list() const { return kind() == Kind::List; }
  bool is_object() const { return kind() == Kind::Object; }

  bool as_bool() const { return get<bool>("bool"); }
  std::int64_t as_int() const { return get<std::int64_t>("int"); }
  double as_float() const { return get<double>("float"); }
  // Numeric value as double regardless of int/float kind.
  double as_number() const;
  const std::string& as_string() const { return get<std::string>("string"); }
  const ValueList& as_list() const { return get<ValueList>("list"); }
  ValueList& as_list() { return const_cast<ValueList&>(get<ValueList>("list")); }
  const ValueObject& as_object() const { return get<ValueObject>("object"); }
  ValueObject& as_object() { return const_cast<ValueObject&>(get<ValueObject>("object")); }

  // Object field access; returns nullptr when absent or not an object.
  const Value* find(const std::string& key) const;

  // Strict structural equality: kinds must match exactly.
  bool operator==(const Value& o) const { return v_ == o.v_; }
  bool operator!=(const Value& o) const { return !(*this == o); }

  nlohmann::json to_json() const;
  static Value from_json(const nlohmann::json& j);  // throws ValueError on non-finite numbers

 private:
  template <typename T>
  const T& get(const char* want) const {
    if (const T* p = std::get_if<T>(&v_)) return *p;
    throw ValueError(std::string("expected ") + want + ", got " + kind_name(kind()));
  }
  std::variant<std::monostate, bool, std::int64_t, double, std::string, ValueList, ValueObject> v_;
};

// Shortest decimal that round-trips the double, always containing '.' or 'e'.
std::string format_float(double d);

// indent < 0 emits the compact single-line form; indent >= 0 pretty-prints
// with that many spaces per level. Both are deterministic.
std::string canonical_dump(const Value& v, int indent = -1);

// Strict JSON parse into the value model. Numbers without '.'/exponent become
// Int, others Float. Throws ValueError on malformed input.
Value canonical_parse(std::string_view text);

// FNV-1a digest of the compact canonical dump; cheap integrity fingerprint.
std::uint64_t value_digest(const Value& v);

}  // namespace arena
