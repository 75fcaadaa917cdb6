#include <map>
#include <memory>
#include <utility>

#include "arena/dsl.hpp"

// Static checker: scoping, builtin arities, effect declarations against the
// database schema, verifier restrictions, and return-shape inference.

namespace arena {

namespace {

// Abstract value type used for inference.  Doc tracks which collection a
// document came from so its field kinds can be read off the schema.
struct AbsType {
  enum class T { Unknown, Prim, List, Doc, Obj };
  T t = T::Unknown;
  Kind prim = Kind::Null;
  std::shared_ptr<AbsType> elem;  // List
  std::string coll;               // Doc
  std::vector<std::pair<std::string, AbsType>> fields;  // Obj

  static AbsType unknown() { return {}; }
  static AbsType of(Kind k) {
    AbsType a;
    a.t = T::Prim;
    a.prim = k;
    if (k == Kind::List) {
      a.t = T::List;
      a.elem = std::make_shared<AbsType>();
    }
    return a;
  }
  static AbsType list_of(AbsType e) {
    AbsType a;
    a.t = T::List;
    a.elem = std::make_shared<AbsType>(std::move(e));
    return a;
  }
  static AbsType doc_of(std::string c) {
    AbsType a;
    a.t = T::Doc;
    a.coll = std::move(c);
    return a;
  }

  bool is_unknown() const { return t == T::Unknown; }
  bool is_list() const { return t == T::List; }
  bool is_numeric() const { return t == T::Prim && (prim == Kind::Int || prim == Kind::Float); }
  bool is_prim(Kind k) const { return t == T::Prim && prim == k; }

  // Concrete kind this type would have at runtime, if statically certain.
  std::optional<Kind> kind() const {
    switch (t) {
      case T::Prim: return prim;
      case T::List: return Kind::List;
      case T::Doc:
      case T::Obj: return Kind::Object;
      case T::Unknown: return std::nullopt;
    }
    return std::nullopt;
  }
};

struct Checker {
  const Program& p;
  const Database* db;
  std::vector<std::map<std::string, AbsType>> scopes;
  std::vector<AbsType> return_types;

  [[noreturn]] static void fail(const std::string& msg, Span sp) { throw CheckError(msg, sp); }

  void push_scope() { scopes.emplace_back(); }
  void pop_scope() { scopes.pop_back(); }

  void bind(const std::string& name, AbsType t) { scopes.back()[name] = std::move(t); }

  const AbsType* lookup(const std::string& name) const {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  void require_collection(const std::string& coll, Span sp) const {
    if (db && db->collections.find(coll) == db->collections.end())
      fail("unknown collection '" + coll + "'", sp);
  }

  AbsType doc_field(const std::string& coll, const std::string& field, Span sp) const {
    if (field == "id") return AbsType::of(Kind::String);
    if (!db) return AbsType::unknown();
    auto it = db->schema.find(coll);
    if (it == db->schema.end()) return AbsType::unknown();
    for (const auto& fd : it->second) {
      if (fd.name == field) return AbsType::of(fd.kind);
    }
    fail("unknown field '" + field + "' on documents of '" + coll + "'", sp);
  }

  void require_bool(const AbsType& t, const char* what, Span sp) const {
    if (!t.is_unknown() && !t.is_prim(Kind::Bool)) fail(std::string(what) + " must be a bool", sp);
  }

  void require_listish(const AbsType& t, const char* what, Span sp) const {
    if (!t.is_unknown() && !t.is_list()) fail(std::string(what) + " must be a list", sp);
  }

  AbsType elem_of(const AbsType& t) const {
    if (t.is_list() && t.elem) return *t.elem;
    return AbsType::unknown();
  }

  AbsType infer_call(const Expr& e) {
    const std::string& n = e.name;
    auto arity = [&](std::size_t lo, std::size_t hi) {
      if (e.args.size() < lo || e.args.size() > hi)
        fail("wrong number of arguments to " + n, e.span);
    };
    if (!e.binder.empty()) {
      // filter / map / count / sort_by
      AbsType lst = infer(*e.args[0]);
      require_listish(lst, n.c_str(), e.span);
      AbsType et = elem_of(lst);
      push_scope();
      bind(e.binder, et);
      AbsType body = infer(*e.args[1]);
      pop_scope();
      if (n == "filter") {
        require_bool(body, "filter predicate", e.span);
        return lst;
      }
      if (n == "count") {
        require_bool(body, "count predicate", e.span);
        return AbsType::of(Kind::Int);
      }
      if (n == "map") return AbsType::list_of(std::move(body));
      // sort_by: key must be orderable
      if (!body.is_unknown() && !body.is_numeric() && !body.is_prim(Kind::String))
        fail("sort_by key must be a number or string", e.span);
      return lst;
    }
    std::vector<AbsType> at;
    at.reserve(e.args.size());
    for (const auto& a : e.args) at.push_back(infer(*a));
    if (n == "sum" || n == "avg" || n == "min" || n == "max") {
      arity(1, 1);
      require_listish(at[0], n.c_str(), e.span);
      AbsType et = elem_of(at[0]);
      if (!et.is_unknown() && !et.is_numeric())
        fail(n + " needs a list of numbers", e.span);
      if (n == "avg") return AbsType::of(Kind::Float);
      if (n == "sum") return et.is_numeric() ? et : AbsType::unknown();
      return et.is_numeric() ? et : AbsType::unknown();
    }
    if (n == "first") {
      arity(1, 1);
      require_listish(at[0], "first", e.span);
      return elem_of(at[0]);
    }
    if (n == "len") {
      arity(1, 1);
      if (!at[0].is_unknown() && !at[0].is_list() && !at[0].is_prim(Kind::String))
        fail("len needs a list or string", e.span);
      return AbsType::of(Kind::Int);
    }
    if (n == "contains") {
      arity(2, 2);
      if (!at[0].is_unknown() && !at[0].is_list() && !at[0].is_prim(Kind::String))
        fail("contains needs a list or string", e.span);
      if (at[0].is_prim(Kind::String) && !at[1].is_unknown() && !at[1].is_prim(Kind::String))
        fail("contains on a string needs a string needle", e.span);
      return AbsType::of(Kind::Bool);
    }
    if (n == "lower") {
      arity(1, 1);
      if (!at[0].is_unknown() && !at[0].is_prim(Kind::String)) fail("lower needs a string", e.span);
      return AbsType::of(Kind::String);
    }
    if (n == "concat") {
      arity(2, 2);
      bool s0 = at[0].is_prim(Kind::String), s1 = at[1].is_prim(Kind::String);
      bool l0 = at[0].is_list(), l1 = at[1].is_list();
      if ((s0 && l1) || (l0 && s1)) fail("concat arguments must both be strings or both lists", e.span);
      if (s0 || s1) return AbsType::of(Kind::String);
      if (l0 && l1) {
        AbsType a = elem_of(at[0]), b = elem_of(at[1]);
        // keep the element type only when both sides agree on a concrete kind
        if (!a.is_unknown() && !b.is_unknown() && a.kind() == b.kind() && a.t == b.t &&
            a.coll == b.coll)
          return at[0];
        return AbsType::list_of(AbsType::unknown());
      }
      if (l0 || l1) return AbsType::list_of(AbsType::unknown());
      return AbsType::unknown();
    }
    if (n == "round") {
      arity(1, 2);
      if (!at[0].is_unknown() && !at[0].is_numeric()) fail("round needs a number", e.span);
      if (e.args.size() == 2) {
        if (!at[1].is_unknown() && !at[1].is_prim(Kind::Int))
          fail("round digit count must be an int", e.span);
        return AbsType::of(Kind::Float);
      }
      return AbsType::of(Kind::Int);
    }
    fail("unknown builtin '" + n + "'", e.span);
  }

  AbsType infer(const Expr& e) {
    switch (e.tag) {
      case Expr::Tag::Lit:
        return AbsType::of(e.lit.kind());
      case Expr::Tag::Var: {
        const AbsType* t = lookup(e.name);
        if (!t) fail("undefined variable '" + e.name + "'", e.span);
        return *t;
      }
      case Expr::Tag::Db: {
        require_collection(e.name, e.span);
        if (!p.sig.reads_collection(e.name))
          fail("reading '" + e.name + "' without declaring it in reads", e.span);
        return AbsType::list_of(AbsType::doc_of(e.name));
      }
      case Expr::Tag::Field: {
        AbsType base = infer(*e.a);
        switch (base.t) {
          case AbsType::T::Doc: return doc_field(base.coll, e.name, e.span);
          case AbsType::T::Obj: {
            for (const auto& [k, v] : base.fields)
              if (k == e.name) return v;
            fail("object has no field '" + e.name + "'", e.span);
          }
          case AbsType::T::Prim:
            if (base.prim != Kind::Object)
              fail("field access on a non-object value", e.span);
            return AbsType::unknown();
          case AbsType::T::List: fail("field access on a list", e.span);
          case AbsType::T::Unknown: return AbsType::unknown();
        }
        return AbsType::unknown();
      }
      case Expr::Tag::Index: {
        AbsType base = infer(*e.a);
        AbsType ix = infer(*e.b);
        if (!ix.is_unknown() && !ix.is_prim(Kind::Int)) fail("index must be an int", e.span);
        if (base.is_list()) return elem_of(base);
        if (!base.is_unknown()) fail("indexing a non-list value", e.span);
        return AbsType::unknown();
      }
      case Expr::Tag::Unary: {
        AbsType a = infer(*e.a);
        if (e.uop == UnOp::Neg) {
          if (!a.is_unknown() && !a.is_numeric()) fail("negation needs a number", e.span);
          return a;
        }
        require_bool(a, "'!' operand", e.span);
        return AbsType::of(Kind::Bool);
      }
      case Expr::Tag::Binary: {
        AbsType a = infer(*e.a);
        AbsType b = infer(*e.b);
        switch (e.bop) {
          case BinOp::Add:
          case BinOp::Sub:
          case BinOp::Mul:
          case BinOp::Div:
          case BinOp::Mod: {
            if (!a.is_unknown() && !a.is_numeric()) fail("arithmetic needs numbers", e.span);
            if (!b.is_unknown() && !b.is_numeric()) fail("arithmetic needs numbers", e.span);
            if (e.bop == BinOp::Mod) {
              if ((a.is_numeric() && a.prim != Kind::Int) || (b.is_numeric() && b.prim != Kind::Int))
                fail("'%' needs ints", e.span);
              return AbsType::of(Kind::Int);
            }
            if (a.is_prim(Kind::Float) || b.is_prim(Kind::Float)) return AbsType::of(Kind::Float);
            if (a.is_prim(Kind::Int) && b.is_prim(Kind::Int)) return AbsType::of(Kind::Int);
            return AbsType::unknown();
          }
          case BinOp::Eq:
          case BinOp::Ne:
            return AbsType::of(Kind::Bool);
          case BinOp::Lt:
          case BinOp::Le:
          case BinOp::Gt:
          case BinOp::Ge: {
            auto orderable = [](const AbsType& t) {
              return t.is_unknown() || t.is_numeric() || t.is_prim(Kind::String);
            };
            if (!orderable(a) || !orderable(b)) fail("comparison needs numbers or strings", e.span);
            if ((a.is_prim(Kind::String) && b.is_numeric()) ||
                (b.is_prim(Kind::String) && a.is_numeric()))
              fail("cannot order a string against a number", e.span);
            return AbsType::of(Kind::Bool);
          }
          case BinOp::And:
          case BinOp::Or:
            require_bool(a, "logical operand", e.span);
            require_bool(b, "logical operand", e.span);
            return AbsType::of(Kind::Bool);
        }
        return AbsType::unknown();
      }
      case Expr::Tag::Call:
        return infer_call(e);
      case Expr::Tag::ListLit: {
        AbsType et = AbsType::unknown();
        bool first = true, uniform = true;
        for (const auto& a : e.args) {
          AbsType t = infer(*a);
          if (first) {
            et = t;
            first = false;
          } else if (uniform) {
            if (t.t != et.t || t.kind() != et.kind() || t.coll != et.coll) uniform = false;
          }
        }
        if (e.args.empty() || !uniform) et = AbsType::unknown();
        return AbsType::list_of(std::move(et));
      }
      case Expr::Tag::ObjectLit: {
        AbsType o;
        o.t = AbsType::T::Obj;
        for (std::size_t i = 0; i < e.keys.size(); ++i) {
          for (std::size_t j = 0; j < i; ++j)
            if (e.keys[j] == e.keys[i]) fail("duplicate key '" + e.keys[i] + "'", e.span);
          o.fields.emplace_back(e.keys[i], infer(*e.args[i]));
        }
        return o;
      }
    }
    return AbsType::unknown();
  }

  void check_write_target(const std::string& coll, Span sp) {
    if (p.is_verifier) fail("verifiers cannot mutate the database", sp);
    require_collection(coll, sp);
    if (!p.sig.writes_collection(coll))
      fail("writing '" + coll + "' without declaring it in writes", sp);
  }

  void check_stmt(const Stmt& s) {
    switch (s.tag) {
      case Stmt::Tag::Let:
        bind(s.name, infer(*s.e1));
        break;
      case Stmt::Tag::If: {
        require_bool(infer(*s.e1), "if condition", s.span);
        push_scope();
        for (const auto& st : s.body) check_stmt(*st);
        pop_scope();
        push_scope();
        for (const auto& st : s.els) check_stmt(*st);
        pop_scope();
        break;
      }
      case Stmt::Tag::For: {
        AbsType lst = infer(*s.e1);
        require_listish(lst, "for iterable", s.span);
        push_scope();
        bind(s.name, elem_of(lst));
        for (const auto& st : s.body) check_stmt(*st);
        pop_scope();
        break;
      }
      case Stmt::Tag::Insert: {
        check_write_target(s.coll, s.span);
        AbsType doc = infer(*s.e1);
        if (auto k = doc.kind(); k && *k != Kind::Object)
          fail("insert needs an object document", s.span);
        break;
      }
      case Stmt::Tag::Update: {
        check_write_target(s.coll, s.span);
        push_scope();
        bind(s.name, AbsType::doc_of(s.coll));
        require_bool(infer(*s.e1), "update predicate", s.span);
        AbsType patch = infer(*s.e2);
        if (auto k = patch.kind(); k && *k != Kind::Object)
          fail("update patch must be an object", s.span);
        if (s.e2->tag == Expr::Tag::ObjectLit) {
          for (const auto& key : s.e2->keys)
            if (key == "id") fail("update patch cannot change 'id'", s.span);
        }
        pop_scope();
        break;
      }
      case Stmt::Tag::Delete: {
        check_write_target(s.coll, s.span);
        push_scope();
        bind(s.name, AbsType::doc_of(s.coll));
        require_bool(infer(*s.e1), "delete predicate", s.span);
        pop_scope();
        break;
      }
      case Stmt::Tag::Assert:
        require_bool(infer(*s.e1), "assert condition", s.span);
        break;
      case Stmt::Tag::Return: {
        AbsType t = infer(*s.e1);
        if (!p.sig.returns_any) {
          if (auto k = t.kind(); k && *k != p.sig.returns)
            fail(std::string("return kind is ") + kind_name(*k) + ", declared " +
                     kind_name(p.sig.returns),
                 s.span);
        }
        return_types.push_back(std::move(t));
        break;
      }
    }
  }

  ReturnShape shape_of(const AbsType& t) const {
    ReturnShape sh;
    switch (t.t) {
      case AbsType::T::Unknown:
        sh.known = false;
        return sh;
      case AbsType::T::Prim:
        sh.known = true;
        sh.is_object = t.prim == Kind::Object;
        return sh;
      case AbsType::T::List:
        sh.known = true;
        sh.is_object = false;
        return sh;
      case AbsType::T::Doc: {
        sh.known = true;
        sh.is_object = true;
        sh.fields["id"] = Kind::String;
        if (db) {
          auto it = db->schema.find(t.coll);
          if (it != db->schema.end())
            for (const auto& fd : it->second) sh.fields[fd.name] = fd.kind;
        }
        return sh;
      }
      case AbsType::T::Obj: {
        sh.known = true;
        sh.is_object = true;
        for (const auto& [k, v] : t.fields)
          if (auto kk = v.kind()) sh.fields[k] = *kk;
        return sh;
      }
    }
    return sh;
  }

  ReturnShape run() {
    push_scope();
    for (const auto& ps : p.sig.params) {
      for (const auto& other : p.sig.params) {
        if (&other != &ps && other.name == ps.name)
          fail("duplicate parameter '" + ps.name + "'", {1, 1});
      }
      bind(ps.name, ps.is_any ? AbsType::unknown() : AbsType::of(ps.kind));
    }
    if (db) {
      for (const auto& r : p.sig.reads)
        if (db->collections.find(r) == db->collections.end())
          fail("reads declares unknown collection '" + r + "'", {1, 1});
      for (const auto& w : p.sig.writes)
        if (db->collections.find(w) == db->collections.end())
          fail("writes declares unknown collection '" + w + "'", {1, 1});
    }
    if (p.is_verifier) {
      if (!p.sig.writes.empty()) fail("verifiers cannot declare writes", {1, 1});
      if (p.sig.params.size() != 1) fail("verifiers take exactly one parameter", {1, 1});
    }
    for (const auto& st : p.body) check_stmt(*st);
    pop_scope();

    if (return_types.empty()) {
      ReturnShape sh;
      sh.known = true;
      sh.is_object = false;
      return sh;
    }
    ReturnShape merged = shape_of(return_types[0]);
    for (std::size_t i = 1; i < return_types.size(); ++i) {
      ReturnShape sh = shape_of(return_types[i]);
      if (!sh.known || !merged.known) {
        merged.known = false;
        merged.fields.clear();
        continue;
      }
      if (sh.is_object != merged.is_object) {
        merged.is_object = false;
        merged.fields.clear();
        continue;
      }
      // intersect fields that agree on kind
      for (auto it = merged.fields.begin(); it != merged.fields.end();) {
        auto f = sh.fields.find(it->first);
        if (f == sh.fields.end() || f->second != it->second)
          it = merged.fields.erase(it);
        else
          ++it;
      }
    }
    return merged;
  }
};

}  // namespace

ReturnShape check_program(const Program& p, const Database* schema_db) {
  Checker c{p, schema_db, {}, {}};
  return c.run();
}

}  // namespace arena
