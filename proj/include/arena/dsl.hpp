#pragma once

// The tool/verifier mini-language: a closed, deterministic DSL in which every
// tool, solution program and verification script executes. No RNG, no clock,
// no I/O — evaluation is a pure function of (program, database snapshot,
// args), which is what makes task ground truths and rewards replayable.
//
// Surface shape:
//
//   tool add_event(user_id: string, title: string) -> object
//       reads [users] writes [events] {
//     let owner = first(filter(db.users, u, u.id == user_id))
//     insert(events, {"id": concat("evt-", title), "title": title})
//     return {"event_id": concat("evt-", title), "owner": owner.name}
//   }
//
//   verifier check(answer) reads [events] {
//     assert answer.count == count(db.events, e, e.cancelled == false)
//   }
//
// Statements: let / if-else / for-in / insert / update / delete / assert /
// return. Expressions: literals (incl. list and object literals), variables,
// db.<collection>, field access, indexing, arithmetic, comparison, boolean
// ops, and the fixed builtin set {filter, map, count, sum, avg, min, max,
// sort_by, first, len, contains, lower, concat, round}. `#` starts a line
// comment.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arena/database.hpp"
#include "arena/value.hpp"

namespace arena {

struct Span {
  int line = 0;
  int col = 0;
};

struct ParseError : Error {
  ParseError(const std::string& msg, Span s) : Error(msg), span(s) {}
  Span span;
};

struct CheckError : Error {
  CheckError(const std::string& msg, Span s) : Error(msg), span(s) {}
  Span span;
};

// ---------------------------------------------------------------------------
// AST

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp { Neg, Not };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Tag { Lit, Var, Db, Field, Index, Unary, Binary, Call, ListLit, ObjectLit };
  Tag tag;
  Span span;

  Value lit;         // Lit
  std::string name;  // Var: variable | Db: collection | Field: field | Call: builtin
  BinOp bop{};
  UnOp uop{};
  ExprPtr a, b;              // Field/Unary use a; Index/Binary use a,b
  std::vector<ExprPtr> args; // Call arguments; ListLit elements; ObjectLit values
  std::string binder;        // bound variable of filter/map/count/sort_by
  std::vector<std::string> keys;  // ObjectLit keys, parallel to args
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
  enum class Tag { Let, If, For, Insert, Update, Delete, Assert, Return };
  Tag tag;
  Span span;
  std::string name;  // Let/For variable; Update/Delete binder
  std::string coll;  // Insert/Update/Delete target collection
  ExprPtr e1, e2;    // Let value | If cond | For iterable | Insert doc |
                     // Update pred,patch | Delete pred | Assert cond | Return value
  std::string msg;   // Assert message
  bool has_msg = false;
  std::vector<StmtPtr> body, els;  // If then/else; For body
};

struct ParamSig {
  std::string name;
  Kind kind = Kind::Null;
  bool is_any = true;  // declared `any` or left untyped
  bool required = true;

  bool operator==(const ParamSig&) const = default;
};

struct ToolSignature {
  std::string name;
  std::vector<ParamSig> params;
  std::vector<std::string> reads;   // sorted, unique
  std::vector<std::string> writes;  // sorted, unique
  Kind returns = Kind::Null;
  bool returns_any = true;

  bool reads_collection(const std::string& c) const;
  bool writes_collection(const std::string& c) const;
  const ParamSig* find_param(const std::string& p) const;
};

struct Program {
  bool is_verifier = false;
  ToolSignature sig;
  std::vector<StmtPtr> body;
};

using ProgramPtr = std::shared_ptr<const Program>;

// ---------------------------------------------------------------------------
// Parse / print

// Parses exactly one program. Errors carry line/column.
ProgramPtr parse_program(const std::string& source);
// Parses a whole `tools.tl` file: one or more programs in sequence.
std::vector<ProgramPtr> parse_program_file(const std::string& source);

// Canonical pretty-printer; print ∘ parse is a fixed point on printed output,
// which is the round-trip oracle used by the property tests.
std::string print_program(const Program& p);

// ---------------------------------------------------------------------------
// Checking

// What a program's return value is statically known to look like; drives the
// dependency classification in the tool graph.
struct ReturnShape {
  bool known = false;
  bool is_object = false;
  // field name -> kind, for fields whose kind is statically certain.
  std::map<std::string, Kind> fields;
};

// Validates scoping, builtin arities, effect declarations against the
// database schema (pass nullptr to skip schema-existence checks), verifier
// restrictions (no writes), and infers the return shape. Throws CheckError
// with the offending span.
ReturnShape check_program(const Program& p, const Database* schema_db);

// ---------------------------------------------------------------------------
// Evaluation

struct WriteOp {
  enum class Op { Insert, Update, Delete };
  Op op = Op::Insert;
  std::string collection;
  std::string doc_id;
  Value patch;  // Insert: the full document; Update: the merged fields; Delete: null

  bool operator==(const WriteOp&) const = default;

  Value to_value() const;
  static WriteOp from_value(const Value& v);
};

struct EvalLimits {
  std::int64_t max_steps = 100000;
};

struct EvalError {
  std::string code;  // one of: type_error, not_found, div_zero, overflow, empty,
                     // assert_failed, schema, effect, bad_args, step_budget
  std::string message;
  Span span;
};

struct EvalOutcome {
  bool ok = false;
  Value value;                  // the program's return value (null if it never returned)
  std::vector<WriteOp> writes;  // ordered effect log
  Database db_after;            // committed state; equals the input db when !ok
  EvalError error;

  // Structured payload for observations: the value itself on success, an
  // {"error": code, "message": ...} object on failure.
  Value observation_payload() const;
};

// Call-level atomicity: evaluates against a private copy, commits only on
// success. Repeated calls with equal inputs produce identical outcomes.
EvalOutcome evaluate_program(const Program& p, const Database& db, const ValueObject& args,
                             const EvalLimits& limits = {});

// Replays a write log against a snapshot state. The interpreter guarantees
// apply_write_ops(db_before, outcome.writes) == outcome.db_after.
Database apply_write_ops(const Database& db, const std::vector<WriteOp>& ops);

// ---------------------------------------------------------------------------
// Unit tests and the retention filter

struct UnitCase {
  ValueObject args;
  std::optional<Value> expect_value;
  std::optional<std::vector<WriteOp>> expect_writes;

  Value to_value() const;
  static UnitCase from_value(const Value& v);
};

// Fraction of cases whose evaluation (from a fresh copy of db) matches every
// stated expectation; errors count as failures. cases must be non-empty.
double run_unit_tests(const Program& p, const std::vector<UnitCase>& cases, const Database& db);

struct ToolCandidate {
  std::string source;
  std::vector<UnitCase> cases;
};

struct ToolReport {
  std::string name;  // best-effort guess when the source failed to parse
  bool parsed = false;
  bool checked = false;
  double accuracy = 0.0;
  bool retained = false;
  std::string reason;
};

struct CheckedTool {
  ProgramPtr program;
  ReturnShape shape;
  std::vector<UnitCase> cases;

  const ToolSignature& sig() const { return program->sig; }
};

struct FilterResult {
  std::vector<CheckedTool> retained;
  std::vector<ToolReport> reports;
};

struct EnvironmentRejected : Error {
  EnvironmentRejected(const std::string& msg, std::vector<ToolReport> r)
      : Error(msg), reports(std::move(r)) {}
  std::vector<ToolReport> reports;
};

// Retains exactly the candidates that parse, check, and score accuracy
// strictly above 0.5 on their unit cases; throws EnvironmentRejected when
// nothing survives. Candidates without any unit case are dropped (nothing
// vouches for them).
FilterResult filter_toolset(const std::vector<ToolCandidate>& candidates, const Database& db);

}  // namespace arena
