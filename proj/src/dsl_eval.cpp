#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>

#include "arena/dsl.hpp"

// Deterministic interpreter.  A call evaluates against a private copy of the
// database and commits only on success, so failed calls leave no trace.

namespace arena {

namespace {

struct EvalAbort {
  EvalError err;
};

[[noreturn]] void abort_eval(std::string code, std::string message, Span span = {}) {
  throw EvalAbort{EvalError{std::move(code), std::move(message), span}};
}

struct Interp {
  const Program& p;
  Database db;
  const EvalLimits& limits;
  std::vector<std::map<std::string, Value>> scopes;
  std::vector<WriteOp> writes;
  std::optional<Value> returned;
  std::size_t steps = 0;

  void tick(Span sp) {
    if (static_cast<std::int64_t>(++steps) > limits.max_steps)
      abort_eval("step_budget", "step budget exhausted", sp);
  }

  void bind(const std::string& name, Value v) { scopes.back()[name] = std::move(v); }

  const Value* lookup(const std::string& name) const {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  ValueList& collection(const std::string& coll, Span sp) {
    auto it = db.collections.find(coll);
    if (it == db.collections.end()) abort_eval("not_found", "unknown collection '" + coll + "'", sp);
    return it->second;
  }

  static bool is_number(const Value& v) { return v.kind() == Kind::Int || v.kind() == Kind::Float; }

  static std::string doc_id_of(const Value& doc, Span sp) {
    const Value* id = doc.find("id");
    if (!id || id->kind() != Kind::String)
      abort_eval("schema", "document needs a string 'id'", sp);
    return id->as_string();
  }

  Value arith(BinOp op, const Value& a, const Value& b, Span sp) {
    if (!is_number(a) || !is_number(b)) abort_eval("type_error", "arithmetic needs numbers", sp);
    if (op == BinOp::Mod) {
      if (a.kind() != Kind::Int || b.kind() != Kind::Int)
        abort_eval("type_error", "'%' needs ints", sp);
      std::int64_t d = b.as_int();
      if (d == 0) abort_eval("div_zero", "modulo by zero", sp);
      if (d == -1 && a.as_int() == INT64_MIN) abort_eval("overflow", "integer overflow", sp);
      return Value(a.as_int() % d);
    }
    if (a.kind() == Kind::Int && b.kind() == Kind::Int) {
      std::int64_t x = a.as_int(), y = b.as_int(), r = 0;
      bool bad = false;
      switch (op) {
        case BinOp::Add: bad = __builtin_add_overflow(x, y, &r); break;
        case BinOp::Sub: bad = __builtin_sub_overflow(x, y, &r); break;
        case BinOp::Mul: bad = __builtin_mul_overflow(x, y, &r); break;
        case BinOp::Div:
          if (y == 0) abort_eval("div_zero", "division by zero", sp);
          if (y == -1 && x == INT64_MIN) bad = true;
          else r = x / y;
          break;
        default: break;
      }
      if (bad) abort_eval("overflow", "integer overflow", sp);
      return Value(r);
    }
    double x = a.as_number(), y = b.as_number(), r = 0;
    switch (op) {
      case BinOp::Add: r = x + y; break;
      case BinOp::Sub: r = x - y; break;
      case BinOp::Mul: r = x * y; break;
      case BinOp::Div:
        if (y == 0.0) abort_eval("div_zero", "division by zero", sp);
        r = x / y;
        break;
      default: break;
    }
    if (!std::isfinite(r)) abort_eval("overflow", "non-finite float result", sp);
    return Value(r);
  }

  bool compare(BinOp op, const Value& a, const Value& b, Span sp) {
    int c;
    if (is_number(a) && is_number(b)) {
      double x = a.as_number(), y = b.as_number();
      c = x < y ? -1 : x > y ? 1 : 0;
    } else if (a.kind() == Kind::String && b.kind() == Kind::String) {
      c = a.as_string().compare(b.as_string());
      c = c < 0 ? -1 : c > 0 ? 1 : 0;
    } else {
      abort_eval("type_error", "comparison needs numbers or strings", sp);
    }
    switch (op) {
      case BinOp::Lt: return c < 0;
      case BinOp::Le: return c <= 0;
      case BinOp::Gt: return c > 0;
      default: return c >= 0;
    }
  }

  bool truth(const Value& v, const char* what, Span sp) {
    if (v.kind() != Kind::Bool) abort_eval("type_error", std::string(what) + " must be a bool", sp);
    return v.as_bool();
  }

  const ValueList& as_list(const Value& v, const char* what, Span sp) {
    if (v.kind() != Kind::List) abort_eval("type_error", std::string(what) + " needs a list", sp);
    return v.as_list();
  }

  Value eval_call(const Expr& e) {
    const std::string& n = e.name;
    Span sp = e.span;
    if (!e.binder.empty()) {
      Value lv = eval(*e.args[0]);
      const ValueList& xs = as_list(lv, n.c_str(), sp);
      if (n == "filter" || n == "map") {
        ValueList out;
        out.reserve(xs.size());
        for (const auto& x : xs) {
          tick(sp);
          scopes.emplace_back();
          bind(e.binder, x);
          Value body = eval(*e.args[1]);
          scopes.pop_back();
          if (n == "filter") {
            if (truth(body, "filter predicate", sp)) out.push_back(x);
          } else {
            out.push_back(std::move(body));
          }
        }
        return Value(std::move(out));
      }
      if (n == "count") {
        std::int64_t k = 0;
        for (const auto& x : xs) {
          tick(sp);
          scopes.emplace_back();
          bind(e.binder, x);
          Value body = eval(*e.args[1]);
          scopes.pop_back();
          if (truth(body, "count predicate", sp)) ++k;
        }
        return Value(k);
      }
      // sort_by: stable, by numeric or string key
      std::vector<std::pair<Value, std::size_t>> keys;
      keys.reserve(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) {
        tick(sp);
        scopes.emplace_back();
        bind(e.binder, xs[i]);
        keys.emplace_back(eval(*e.args[1]), i);
        scopes.pop_back();
      }
      bool numeric = true, stringy = true;
      for (const auto& [k, _] : keys) {
        if (!is_number(k)) numeric = false;
        if (k.kind() != Kind::String) stringy = false;
      }
      if (!numeric && !stringy)
        abort_eval("type_error", "sort_by keys must all be numbers or all strings", sp);
      std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        if (numeric) return a.first.as_number() < b.first.as_number();
        return a.first.as_string() < b.first.as_string();
      });
      ValueList out;
      out.reserve(xs.size());
      for (const auto& [_, i] : keys) out.push_back(xs[i]);
      return Value(std::move(out));
    }

    std::vector<Value> av;
    av.reserve(e.args.size());
    for (const auto& a : e.args) av.push_back(eval(*a));

    if (n == "sum") {
      const ValueList& xs = as_list(av[0], "sum", sp);
      bool all_int = true;
      for (const auto& x : xs) {
        if (!is_number(x)) abort_eval("type_error", "sum needs numbers", sp);
        if (x.kind() != Kind::Int) all_int = false;
      }
      if (all_int) {
        std::int64_t s = 0;
        for (const auto& x : xs)
          if (__builtin_add_overflow(s, x.as_int(), &s)) abort_eval("overflow", "integer overflow", sp);
        return Value(s);
      }
      double s = 0;
      for (const auto& x : xs) s += x.as_number();
      if (!std::isfinite(s)) abort_eval("overflow", "non-finite float result", sp);
      return Value(s);
    }
    if (n == "avg") {
      const ValueList& xs = as_list(av[0], "avg", sp);
      if (xs.empty()) abort_eval("empty", "avg of an empty list", sp);
      double s = 0;
      for (const auto& x : xs) {
        if (!is_number(x)) abort_eval("type_error", "avg needs numbers", sp);
        s += x.as_number();
      }
      s /= static_cast<double>(xs.size());
      if (!std::isfinite(s)) abort_eval("overflow", "non-finite float result", sp);
      return Value(s);
    }
    if (n == "min" || n == "max") {
      const ValueList& xs = as_list(av[0], n.c_str(), sp);
      if (xs.empty()) abort_eval("empty", n + " of an empty list", sp);
      std::size_t best = 0;
      for (const auto& x : xs)
        if (!is_number(x)) abort_eval("type_error", n + " needs numbers", sp);
      for (std::size_t i = 1; i < xs.size(); ++i) {
        double a = xs[i].as_number(), b = xs[best].as_number();
        if (n == "min" ? a < b : a > b) best = i;
      }
      return xs[best];
    }
    if (n == "first") {
      const ValueList& xs = as_list(av[0], "first", sp);
      if (xs.empty()) abort_eval("empty", "first of an empty list", sp);
      return xs[0];
    }
    if (n == "len") {
      if (av[0].kind() == Kind::List) return Value(static_cast<std::int64_t>(av[0].as_list().size()));
      if (av[0].kind() == Kind::String)
        return Value(static_cast<std::int64_t>(av[0].as_string().size()));
      abort_eval("type_error", "len needs a list or string", sp);
    }
    if (n == "contains") {
      if (av[0].kind() == Kind::List) {
        for (const auto& x : av[0].as_list())
          if (x == av[1]) return Value(true);
        return Value(false);
      }
      if (av[0].kind() == Kind::String) {
        if (av[1].kind() != Kind::String)
          abort_eval("type_error", "contains on a string needs a string needle", sp);
        return Value(av[0].as_string().find(av[1].as_string()) != std::string::npos);
      }
      abort_eval("type_error", "contains needs a list or string", sp);
    }
    if (n == "lower") {
      if (av[0].kind() != Kind::String) abort_eval("type_error", "lower needs a string", sp);
      std::string s = av[0].as_string();
      for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      return Value(std::move(s));
    }
    if (n == "concat") {
      if (av[0].kind() == Kind::String && av[1].kind() == Kind::String)
        return Value(av[0].as_string() + av[1].as_string());
      if (av[0].kind() == Kind::List && av[1].kind() == Kind::List) {
        ValueList out = av[0].as_list();
        for (const auto& x : av[1].as_list()) out.push_back(x);
        return Value(std::move(out));
      }
      abort_eval("type_error", "concat arguments must both be strings or both lists", sp);
    }
    if (n == "round") {
      if (!is_number(av[0])) abort_eval("type_error", "round needs a number", sp);
      double x = av[0].as_number();
      if (av.size() == 1) {
        if (x < -9.0e18 || x > 9.0e18) abort_eval("overflow", "round out of int range", sp);
        return Value(static_cast<std::int64_t>(std::llround(x)));
      }
      if (av[1].kind() != Kind::Int) abort_eval("type_error", "round digit count must be an int", sp);
      std::int64_t d = av[1].as_int();
      if (d < 0 || d > 12) abort_eval("type_error", "round digit count out of range", sp);
      double scale = std::pow(10.0, static_cast<double>(d));
      double r = std::round(x * scale) / scale;
      if (!std::isfinite(r)) abort_eval("overflow", "non-finite float result", sp);
      return Value(r);
    }
    abort_eval("type_error", "unknown builtin '" + n + "'", sp);
  }

  Value eval(const Expr& e) {
    tick(e.span);
    switch (e.tag) {
      case Expr::Tag::Lit:
        return e.lit;
      case Expr::Tag::Var: {
        const Value* v = lookup(e.name);
        if (!v) abort_eval("not_found", "undefined variable '" + e.name + "'", e.span);
        return *v;
      }
      case Expr::Tag::Db: {
        if (!p.sig.reads_collection(e.name))
          abort_eval("effect", "reading '" + e.name + "' without declaring it in reads", e.span);
        return Value(collection(e.name, e.span));
      }
      case Expr::Tag::Field: {
        Value base = eval(*e.a);
        if (base.kind() != Kind::Object)
          abort_eval("type_error", "field access on a non-object value", e.span);
        const Value* f = base.find(e.name);
        if (!f) abort_eval("not_found", "no field '" + e.name + "'", e.span);
        return *f;
      }
      case Expr::Tag::Index: {
        Value base = eval(*e.a);
        Value ix = eval(*e.b);
        if (ix.kind() != Kind::Int) abort_eval("type_error", "index must be an int", e.span);
        const ValueList& xs = as_list(base, "indexing", e.span);
        std::int64_t i = ix.as_int();
        if (i < 0 || static_cast<std::size_t>(i) >= xs.size())
          abort_eval("not_found", "index out of range", e.span);
        return xs[static_cast<std::size_t>(i)];
      }
      case Expr::Tag::Unary: {
        Value a = eval(*e.a);
        if (e.uop == UnOp::Not) return Value(!truth(a, "'!' operand", e.span));
        if (a.kind() == Kind::Int) {
          if (a.as_int() == INT64_MIN) abort_eval("overflow", "integer overflow", e.span);
          return Value(-a.as_int());
        }
        if (a.kind() == Kind::Float) return Value(-a.as_float());
        abort_eval("type_error", "negation needs a number", e.span);
      }
      case Expr::Tag::Binary: {
        switch (e.bop) {
          case BinOp::And: {
            Value a = eval(*e.a);
            if (!truth(a, "logical operand", e.span)) return Value(false);
            return Value(truth(eval(*e.b), "logical operand", e.span));
          }
          case BinOp::Or: {
            Value a = eval(*e.a);
            if (truth(a, "logical operand", e.span)) return Value(true);
            return Value(truth(eval(*e.b), "logical operand", e.span));
          }
          case BinOp::Eq:
            return Value(eval(*e.a) == eval(*e.b));
          case BinOp::Ne:
            return Value(!(eval(*e.a) == eval(*e.b)));
          case BinOp::Lt:
          case BinOp::Le:
          case BinOp::Gt:
          case BinOp::Ge: {
            Value a = eval(*e.a), b = eval(*e.b);
            return Value(compare(e.bop, a, b, e.span));
          }
          default: {
            Value a = eval(*e.a), b = eval(*e.b);
            return arith(e.bop, a, b, e.span);
          }
        }
      }
      case Expr::Tag::Call:
        return eval_call(e);
      case Expr::Tag::ListLit: {
        ValueList out;
        out.reserve(e.args.size());
        for (const auto& a : e.args) out.push_back(eval(*a));
        return Value(std::move(out));
      }
      case Expr::Tag::ObjectLit: {
        ValueObject out;
        for (std::size_t i = 0; i < e.keys.size(); ++i) out[e.keys[i]] = eval(*e.args[i]);
        return Value(std::move(out));
      }
    }
    abort_eval("type_error", "unreachable expression", e.span);
  }

  void require_write(const std::string& coll, Span sp) {
    if (p.is_verifier) abort_eval("effect", "verifiers cannot mutate the database", sp);
    if (!p.sig.writes_collection(coll))
      abort_eval("effect", "writing '" + coll + "' without declaring it in writes", sp);
  }

  const CollectionSchema* schema_of(const std::string& coll) const {
    auto it = db.schema.find(coll);
    return it == db.schema.end() ? nullptr : &it->second;
  }

  void exec_insert(const Stmt& s) {
    require_write(s.coll, s.span);
    Value doc = eval(*s.e1);
    if (doc.kind() != Kind::Object) abort_eval("schema", "insert needs an object document", s.span);
    std::string id = doc_id_of(doc, s.span);
    ValueList& coll = collection(s.coll, s.span);
    for (const auto& d : coll) {
      const Value* did = d.find("id");
      if (did && did->kind() == Kind::String && did->as_string() == id)
        abort_eval("schema", "duplicate id '" + id + "' in '" + s.coll + "'", s.span);
    }
    if (const CollectionSchema* sch = schema_of(s.coll)) {
      if (std::string err = document_schema_error(doc, *sch); !err.empty())
        abort_eval("schema", err, s.span);
    }
    coll.push_back(doc);
    writes.push_back(WriteOp{WriteOp::Op::Insert, s.coll, id, doc});
  }

  void exec_update(const Stmt& s) {
    require_write(s.coll, s.span);
    ValueList& coll = collection(s.coll, s.span);
    std::vector<std::pair<std::size_t, Value>> hits;
    for (std::size_t i = 0; i < coll.size(); ++i) {
      tick(s.span);
      scopes.emplace_back();
      bind(s.name, coll[i]);
      bool hit = truth(eval(*s.e1), "update predicate", s.span);
      if (hit) {
        Value patch = eval(*s.e2);
        if (patch.kind() != Kind::Object) abort_eval("schema", "update patch must be an object", s.span);
        if (patch.find("id")) abort_eval("schema", "update patch cannot change 'id'", s.span);
        hits.emplace_back(i, std::move(patch));
      }
      scopes.pop_back();
    }
    const CollectionSchema* sch = schema_of(s.coll);
    for (auto& [i, patch] : hits) {
      Value merged = coll[i];
      ValueObject obj = merged.as_object();
      for (const auto& [k, v] : patch.as_object()) obj[k] = v;
      merged = Value(std::move(obj));
      if (sch) {
        if (std::string err = document_schema_error(merged, *sch); !err.empty())
          abort_eval("schema", err, s.span);
      }
      std::string id = doc_id_of(coll[i], s.span);
      coll[i] = std::move(merged);
      writes.push_back(WriteOp{WriteOp::Op::Update, s.coll, id, patch});
    }
  }

  void exec_delete(const Stmt& s) {
    require_write(s.coll, s.span);
    ValueList& coll = collection(s.coll, s.span);
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < coll.size(); ++i) {
      tick(s.span);
      scopes.emplace_back();
      bind(s.name, coll[i]);
      if (truth(eval(*s.e1), "delete predicate", s.span)) hits.push_back(i);
      scopes.pop_back();
    }
    for (std::size_t i : hits)
      writes.push_back(WriteOp{WriteOp::Op::Delete, s.coll, doc_id_of(coll[i], s.span), Value()});
    for (auto it = hits.rbegin(); it != hits.rend(); ++it)
      coll.erase(coll.begin() + static_cast<std::ptrdiff_t>(*it));
  }

  void exec(const Stmt& s) {
    tick(s.span);
    switch (s.tag) {
      case Stmt::Tag::Let:
        bind(s.name, eval(*s.e1));
        break;
      case Stmt::Tag::If: {
        bool c = truth(eval(*s.e1), "if condition", s.span);
        scopes.emplace_back();
        exec_block(c ? s.body : s.els);
        scopes.pop_back();
        break;
      }
      case Stmt::Tag::For: {
        Value lv = eval(*s.e1);
        ValueList xs = as_list(lv, "for iterable", s.span);  // iterate over a copy
        for (const auto& x : xs) {
          scopes.emplace_back();
          bind(s.name, x);
          exec_block(s.body);
          scopes.pop_back();
          if (returned) break;
        }
        break;
      }
      case Stmt::Tag::Insert:
        exec_insert(s);
        break;
      case Stmt::Tag::Update:
        exec_update(s);
        break;
      case Stmt::Tag::Delete:
        exec_delete(s);
        break;
      case Stmt::Tag::Assert: {
        if (!truth(eval(*s.e1), "assert condition", s.span))
          abort_eval("assert_failed", s.has_msg ? s.msg : "assertion failed", s.span);
        break;
      }
      case Stmt::Tag::Return: {
        Value v = eval(*s.e1);
        if (!p.sig.returns_any && v.kind() != p.sig.returns)
          abort_eval("type_error",
                     std::string("return kind is ") + kind_name(v.kind()) + ", declared " +
                         kind_name(p.sig.returns),
                     s.span);
        returned = std::move(v);
        break;
      }
    }
  }

  void exec_block(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) {
      exec(*s);
      if (returned) return;
    }
  }
};

void bind_args(Interp& in, const Program& p, const ValueObject& args) {
  for (const auto& [k, v] : args) {
    const ParamSig* ps = p.sig.find_param(k);
    if (!ps) abort_eval("bad_args", "unknown argument '" + k + "'");
    if (!ps->is_any && v.kind() != ps->kind && !(v.kind() == Kind::Null && !ps->required))
      abort_eval("bad_args", "argument '" + k + "' must be " + kind_name(ps->kind) + ", got " +
                                 kind_name(v.kind()));
  }
  for (const auto& ps : p.sig.params) {
    auto it = args.find(ps.name);
    if (it == args.end()) {
      if (ps.required) abort_eval("bad_args", "missing required argument '" + ps.name + "'");
      in.bind(ps.name, Value());
    } else {
      in.bind(ps.name, it->second);
    }
  }
}

}  // namespace

Value EvalOutcome::observation_payload() const {
  if (ok) return value;
  ValueObject o;
  o["error"] = Value(error.code);
  o["message"] = Value(error.message);
  return Value(std::move(o));
}

EvalOutcome evaluate_program(const Program& p, const Database& db, const ValueObject& args,
                             const EvalLimits& limits) {
  EvalOutcome out;
  Interp in{p, db, limits, {}, {}, {}, 0};
  in.scopes.emplace_back();
  try {
    bind_args(in, p, args);
    in.exec_block(p.body);
    out.ok = true;
    out.value = in.returned.value_or(Value());
    out.writes = std::move(in.writes);
    out.db_after = std::move(in.db);
  } catch (const EvalAbort& a) {
    out.ok = false;
    out.error = a.err;
    out.db_after = db;  // atomic: failed calls leave the database untouched
  }
  return out;
}

Database apply_write_ops(const Database& db, const std::vector<WriteOp>& ops) {
  Database out = db;
  for (const auto& op : ops) {
    auto it = out.collections.find(op.collection);
    if (it == out.collections.end())
      throw ValueError("replay: unknown collection '" + op.collection + "'");
    ValueList& coll = it->second;
    auto find_doc = [&]() -> std::size_t {
      for (std::size_t i = 0; i < coll.size(); ++i) {
        const Value* id = coll[i].find("id");
        if (id && id->kind() == Kind::String && id->as_string() == op.doc_id) return i;
      }
      throw ValueError("replay: no document '" + op.doc_id + "' in '" + op.collection + "'");
    };
    switch (op.op) {
      case WriteOp::Op::Insert:
        coll.push_back(op.patch);
        break;
      case WriteOp::Op::Update: {
        std::size_t i = find_doc();
        ValueObject obj = coll[i].as_object();
        for (const auto& [k, v] : op.patch.as_object()) obj[k] = v;
        coll[i] = Value(std::move(obj));
        break;
      }
      case WriteOp::Op::Delete: {
        std::size_t i = find_doc();
        coll.erase(coll.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
  }
  return out;
}

// ---- serialization --------------------------------------------------------

namespace {
const char* op_name(WriteOp::Op op) {
  switch (op) {
    case WriteOp::Op::Insert: return "insert";
    case WriteOp::Op::Update: return "update";
    case WriteOp::Op::Delete: return "delete";
  }
  return "?";
}
}  // namespace

Value WriteOp::to_value() const {
  ValueObject o;
  o["kind"] = Value(std::string(op_name(op)));
  o["collection"] = Value(collection);
  o["doc_id"] = Value(doc_id);
  o["patch"] = patch;
  return Value(std::move(o));
}

WriteOp WriteOp::from_value(const Value& v) {
  if (v.kind() != Kind::Object) throw ValueError("write op must be an object");
  WriteOp op;
  const Value* k = v.find("kind");
  if (!k || k->kind() != Kind::String) throw ValueError("write op needs a 'kind'");
  const std::string& ks = k->as_string();
  if (ks == "insert") op.op = Op::Insert;
  else if (ks == "update") op.op = Op::Update;
  else if (ks == "delete") op.op = Op::Delete;
  else throw ValueError("unknown write op kind '" + ks + "'");
  const Value* c = v.find("collection");
  const Value* d = v.find("doc_id");
  if (!c || c->kind() != Kind::String || !d || d->kind() != Kind::String)
    throw ValueError("write op needs 'collection' and 'doc_id' strings");
  op.collection = c->as_string();
  op.doc_id = d->as_string();
  if (const Value* pz = v.find("patch")) op.patch = *pz;
  return op;
}

Value UnitCase::to_value() const {
  ValueObject o;
  o["args"] = Value(args);
  if (expect_value) o["expect_value"] = *expect_value;
  if (expect_writes) {
    ValueList ws;
    ws.reserve(expect_writes->size());
    for (const auto& w : *expect_writes) ws.push_back(w.to_value());
    o["expect_writes"] = Value(std::move(ws));
  }
  return Value(std::move(o));
}

UnitCase UnitCase::from_value(const Value& v) {
  if (v.kind() != Kind::Object) throw ValueError("unit case must be an object");
  UnitCase c;
  const Value* a = v.find("args");
  if (!a || a->kind() != Kind::Object) throw ValueError("unit case needs an 'args' object");
  c.args = a->as_object();
  if (const Value* ev = v.find("expect_value")) c.expect_value = *ev;
  if (const Value* ew = v.find("expect_writes")) {
    if (ew->kind() != Kind::List) throw ValueError("expect_writes must be a list");
    std::vector<WriteOp> ops;
    ops.reserve(ew->as_list().size());
    for (const auto& w : ew->as_list()) ops.push_back(WriteOp::from_value(w));
    c.expect_writes = std::move(ops);
  }
  return c;
}

// ---- unit tests and filtering ---------------------------------------------

double run_unit_tests(const Program& p, const std::vector<UnitCase>& cases, const Database& db) {
  if (cases.empty()) return 0.0;
  std::size_t passed = 0;
  for (const auto& c : cases) {
    EvalOutcome out = evaluate_program(p, db, c.args);
    bool ok = out.ok;
    if (ok && c.expect_value) ok = out.value == *c.expect_value;
    if (ok && c.expect_writes) ok = out.writes == *c.expect_writes;
    if (ok) ++passed;
  }
  return static_cast<double>(passed) / static_cast<double>(cases.size());
}

namespace {

// Best-effort name extraction so reports can label sources that fail to parse.
std::string guess_name(const std::string& source) {
  for (const char* kw : {"tool", "verifier"}) {
    std::size_t at = source.find(kw);
    if (at == std::string::npos) continue;
    std::size_t i = at + std::string(kw).size();
    while (i < source.size() && (source[i] == ' ' || source[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < source.size() &&
           (source[i] == '_' || std::isalnum(static_cast<unsigned char>(source[i]))))
      ++i;
    if (i > start) return source.substr(start, i - start);
  }
  return "<unnamed>";
}

std::string format_accuracy(double acc) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", acc);
  return buf;
}

}  // namespace

FilterResult filter_toolset(const std::vector<ToolCandidate>& candidates, const Database& db) {
  FilterResult result;
  std::vector<std::string> kept_names;
  for (const auto& cand : candidates) {
    ToolReport rep;
    ProgramPtr prog;
    try {
      prog = parse_program(cand.source);
      rep.name = prog->sig.name;
      rep.parsed = true;
    } catch (const ParseError& e) {
      rep.name = guess_name(cand.source);
      rep.reason = std::string("parse error: ") + e.what();
      result.reports.push_back(std::move(rep));
      continue;
    }
    if (prog->is_verifier) {
      rep.reason = "not a tool";
      result.reports.push_back(std::move(rep));
      continue;
    }
    ReturnShape shape;
    try {
      shape = check_program(*prog, &db);
      rep.checked = true;
    } catch (const CheckError& e) {
      rep.reason = std::string("check error: ") + e.what();
      result.reports.push_back(std::move(rep));
      continue;
    }
    bool duplicate = false;
    for (const auto& n : kept_names)
      if (n == rep.name) duplicate = true;
    if (duplicate) {
      rep.reason = "duplicate tool name";
      result.reports.push_back(std::move(rep));
      continue;
    }
    if (cand.cases.empty()) {
      rep.reason = "no unit cases";
      result.reports.push_back(std::move(rep));
      continue;
    }
    rep.accuracy = run_unit_tests(*prog, cand.cases, db);
    if (rep.accuracy > 0.5) {
      rep.retained = true;
      kept_names.push_back(rep.name);
      CheckedTool tool;
      tool.program = prog;
      tool.shape = std::move(shape);
      tool.cases = cand.cases;
      result.retained.push_back(std::move(tool));
    } else {
      rep.reason = "unit-case accuracy " + format_accuracy(rep.accuracy) + " not above 0.5";
    }
    result.reports.push_back(std::move(rep));
  }
  if (result.retained.empty())
    throw EnvironmentRejected("no tools retained after filtering", result.reports);
  return result;
}

}  // namespace arena
