#include "arena/value.hpp"

#include <charconv>
#include <cmath>

#include "arena/rng.hpp"

namespace arena {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Null: return "null";
    case Kind::Bool: return "bool";
    case Kind::Int: return "int";
    case Kind::Float: return "float";
    case Kind::String: return "string";
    case Kind::List: return "list";
    case Kind::Object: return "object";
  }
  return "?";
}

Kind kind_from_name(const std::string& name, bool* is_any) {
  if (is_any) *is_any = false;
  if (name == "null") return Kind::Null;
  if (name == "bool") return Kind::Bool;
  if (name == "int") return Kind::Int;
  if (name == "float") return Kind::Float;
  if (name == "string") return Kind::String;
  if (name == "list") return Kind::List;
  if (name == "object") return Kind::Object;
  if (name == "any" && is_any) {
    *is_any = true;
    return Kind::Null;
  }
  throw ValueError("unknown value kind: " + name);
}

Value::Value(double d) : v_(d) {
  if (!std::isfinite(d)) throw ValueError("non-finite float rejected");
}

double Value::as_number() const {
  if (is_int()) return static_cast<double>(as_int());
  return as_float();
}

const Value* Value::find(const std::string& key) const {
  if (!is_object()) return nullptr;
  auto& o = as_object();
  auto it = o.find(key);
  return it == o.end() ? nullptr : &it->second;
}

nlohmann::json Value::to_json() const {
  switch (kind()) {
    case Kind::Null: return nullptr;
    case Kind::Bool: return as_bool();
    case Kind::Int: return as_int();
    case Kind::Float: return as_float();
    case Kind::String: return as_string();
    case Kind::List: {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& v : as_list()) a.push_back(v.to_json());
      return a;
    }
    case Kind::Object: {
      nlohmann::json o = nlohmann::json::object();
      for (const auto& [k, v] : as_object()) o[k] = v.to_json();
      return o;
    }
  }
  return nullptr;
}

Value Value::from_json(const nlohmann::json& j) {
  using J = nlohmann::json::value_t;
  switch (j.type()) {
    case J::null: return Value();
    case J::boolean: return Value(j.get<bool>());
    case J::number_integer: return Value(j.get<std::int64_t>());
    case J::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(INT64_MAX)) throw ValueError("integer out of int64 range");
      return Value(static_cast<std::int64_t>(u));
    }
    case J::number_float: return Value(j.get<double>());
    case J::string: return Value(j.get<std::string>());
    case J::array: {
      ValueList l;
      l.reserve(j.size());
      for (const auto& e : j) l.push_back(from_json(e));
      return Value(std::move(l));
    }
    case J::object: {
      ValueObject o;
      for (auto it = j.begin(); it != j.end(); ++it) o.emplace(it.key(), from_json(it.value()));
      return Value(std::move(o));
    }
    default: throw ValueError("unsupported json payload");
  }
}

std::string format_float(double d) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, res.ptr);
  // Keep the float kind recoverable: "2" would re-parse as an integer.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find('n') == std::string::npos) {
    s += ".0";
  }
  return s;
}

namespace {

void escape_string(const std::string& s, std::string& out) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void dump_rec(const Value& v, int indent, int depth, std::string& out) {
  const bool pretty = indent >= 0;
  auto newline = [&](int d) {
    if (!pretty) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.kind()) {
    case Kind::Null: out += "null"; break;
    case Kind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case Kind::Int: out += std::to_string(v.as_int()); break;
    case Kind::Float: out += format_float(v.as_float()); break;
    case Kind::String: escape_string(v.as_string(), out); break;
    case Kind::List: {
      const auto& l = v.as_list();
      if (l.empty()) {
        out += "[]";
        break;
      }
      out += '[';
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (i) out += ',';
        newline(depth + 1);
        dump_rec(l[i], indent, depth + 1, out);
      }
      newline(depth);
      out += ']';
      break;
    }
    case Kind::Object: {
      const auto& o = v.as_object();
      if (o.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, val] : o) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        escape_string(k, out);
        out += pretty ? ": " : ":";
        dump_rec(val, indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      break;
    }
  }
}

}  // namespace

std::string canonical_dump(const Value& v, int indent) {
  std::string out;
  dump_rec(v, indent, 0, out);
  return out;
}

Value canonical_parse(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ValueError("malformed json");
  return Value::from_json(j);
}

std::uint64_t value_digest(const Value& v) { return fnv1a(canonical_dump(v)); }

}  // namespace arena
