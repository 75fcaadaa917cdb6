#include <string>
#include <vector>

#include "arena/rng.hpp"
#include "doctest.h"
#include "dsl_fixtures.hpp"

using namespace arena;
using arena::testfix::make_test_db;
using arena::testfix::obj;

namespace {

Value evx(const std::string& expr, const Database& db) {
  auto p = parse_program("tool t() reads [users, orders] { return " + expr + " }");
  EvalOutcome out = evaluate_program(*p, db, {});
  CAPTURE(expr);
  CAPTURE(out.error.message);
  REQUIRE(out.ok);
  return out.value;
}

std::string evx_err(const std::string& expr, const Database& db) {
  auto p = parse_program("tool t() reads [users, orders] { return " + expr + " }");
  EvalOutcome out = evaluate_program(*p, db, {});
  CAPTURE(expr);
  REQUIRE_FALSE(out.ok);
  CHECK(out.db_after == db);
  return out.error.code;
}

// Independent replay oracle: re-applies a write log with the dumbest possible
// implementation, used to cross-check both db_after and apply_write_ops.
Database replay_oracle(Database db, const std::vector<WriteOp>& ops) {
  for (const auto& op : ops) {
    ValueList& coll = db.collections.at(op.collection);
    if (op.op == WriteOp::Op::Insert) {
      coll.push_back(op.patch);
      continue;
    }
    for (std::size_t i = 0; i < coll.size(); ++i) {
      const Value* id = coll[i].find("id");
      if (!id || id->as_string() != op.doc_id) continue;
      if (op.op == WriteOp::Op::Delete) {
        coll.erase(coll.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ValueObject o = coll[i].as_object();
        for (const auto& [k, v] : op.patch.as_object()) o[k] = v;
        coll[i] = Value(std::move(o));
      }
      break;
    }
  }
  return db;
}

}  // namespace

TEST_CASE("integer and float arithmetic keep their kinds") {
  Database db = make_test_db();
  CHECK(evx("7 / 2", db) == Value(std::int64_t(3)));
  CHECK(evx("-7 / 2", db) == Value(std::int64_t(-3)));
  CHECK(evx("7 % 3", db) == Value(std::int64_t(1)));
  CHECK(evx("-7 % 3", db) == Value(std::int64_t(-1)));
  CHECK(evx("7.0 / 2", db) == Value(3.5));
  CHECK(evx("1 + 2.5", db) == Value(3.5));
  CHECK(evx("2 * 3", db) == Value(std::int64_t(6)));
  CHECK(evx("1.5 * 2.0", db) == Value(3.0));
  CHECK(evx("-(3 - 5)", db) == Value(std::int64_t(2)));

  CHECK(evx_err("1 / 0", db) == "div_zero");
  CHECK(evx_err("1.0 / 0.0", db) == "div_zero");
  CHECK(evx_err("5 % 0", db) == "div_zero");
  CHECK(evx_err("9223372036854775807 + 1", db) == "overflow");
  CHECK(evx_err("1e308 * 10.0", db) == "overflow");
  CHECK(evx_err("1 + \"a\"", db) == "type_error");
  CHECK(evx_err("1.5 % 2", db) == "type_error");
}

TEST_CASE("equality is strict, ordering is numeric or lexicographic") {
  Database db = make_test_db();
  CHECK(evx("1 == 1.0", db) == Value(false));
  CHECK(evx("1 != 1.0", db) == Value(true));
  CHECK(evx("[1, 2] == [1, 2]", db) == Value(true));
  CHECK(evx("{\"a\": 1} == {\"a\": 1}", db) == Value(true));
  CHECK(evx("{\"a\": 1} == {\"a\": 1.0}", db) == Value(false));
  CHECK(evx("null == null", db) == Value(true));
  CHECK(evx("1 < 1.5", db) == Value(true));
  CHECK(evx("2 <= 2.0", db) == Value(true));
  CHECK(evx("\"apple\" < \"banana\"", db) == Value(true));
  CHECK(evx("\"b\" >= \"b\"", db) == Value(true));
  CHECK(evx_err("\"a\" < 1", db) == "type_error");
  CHECK(evx_err("[1] < [2]", db) == "type_error");
}

TEST_CASE("logical operators short-circuit") {
  Database db = make_test_db();
  CHECK(evx("false && 1 / 0 == 0", db) == Value(false));
  CHECK(evx("true || 1 / 0 == 0", db) == Value(true));
  CHECK(evx("true && false", db) == Value(false));
  CHECK(evx("!false", db) == Value(true));
  CHECK(evx_err("1 && true", db) == "type_error");
  CHECK(evx_err("true && 2", db) == "type_error");
}

TEST_CASE("builtins match their hand-computed values") {
  Database db = make_test_db();
  CHECK(evx("sum([])", db) == Value(std::int64_t(0)));
  CHECK(evx("sum([1, 2, 3])", db) == Value(std::int64_t(6)));
  CHECK(evx("sum([1, 2.5])", db) == Value(3.5));
  CHECK(evx("avg([1, 2])", db) == Value(1.5));
  CHECK(evx("min([2, 1.5])", db) == Value(1.5));
  CHECK(evx("max([2, 1.5])", db) == Value(std::int64_t(2)));
  CHECK(evx("first([7, 8])", db) == Value(std::int64_t(7)));
  CHECK(evx("len(\"abc\")", db) == Value(std::int64_t(3)));
  CHECK(evx("len([])", db) == Value(std::int64_t(0)));
  CHECK(evx("contains([1, 2], 1)", db) == Value(true));
  CHECK(evx("contains([1, 2], 1.0)", db) == Value(false));
  CHECK(evx("contains(\"hello\", \"ell\")", db) == Value(true));
  CHECK(evx("contains(\"hello\", \"xyz\")", db) == Value(false));
  CHECK(evx("lower(\"AbC9\")", db) == Value(std::string("abc9")));
  CHECK(evx("concat(\"ab\", \"cd\")", db) == Value(std::string("abcd")));
  CHECK(evx("concat([1], [2, 3])", db) ==
        Value(ValueList{Value(std::int64_t(1)), Value(std::int64_t(2)), Value(std::int64_t(3))}));
  CHECK(evx("round(2.5)", db) == Value(std::int64_t(3)));
  CHECK(evx("round(-2.5)", db) == Value(std::int64_t(-3)));
  CHECK(evx("round(2.4)", db) == Value(std::int64_t(2)));
  CHECK(evx("round(3.14159, 2)", db) == Value(3.14));
  CHECK(evx("round(10, 1)", db) == Value(10.0));

  CHECK(evx_err("avg([])", db) == "empty");
  CHECK(evx_err("min([])", db) == "empty");
  CHECK(evx_err("max([])", db) == "empty");
  CHECK(evx_err("first([])", db) == "empty");
  CHECK(evx_err("sum([true])", db) == "type_error");
  CHECK(evx_err("round(1.5, -1)", db) == "type_error");
}

TEST_CASE("binder builtins iterate in document order") {
  Database db = make_test_db();
  CHECK(evx("map(db.orders, o, o.id)", db) ==
        Value(ValueList{Value(std::string("o1")), Value(std::string("o2")),
                        Value(std::string("o3")), Value(std::string("o4"))}));
  CHECK(evx("count(db.users, u, u.age > 30)", db) == Value(std::int64_t(2)));
  CHECK(evx("map(filter(db.orders, o, o.status == \"open\"), o, o.total)", db) ==
        Value(ValueList{Value(19.5), Value(42.25)}));
  CHECK(evx("sum(map(db.orders, o, o.total))", db) == Value(19.5 + 5.0 + 42.25 + 7.75));
  CHECK(evx("avg(map(db.users, u, u.age))", db) == Value((36.0 + 24.0 + 51.0) / 3.0));
  // nested binders see the outer binder
  CHECK(evx("map(db.users, u, count(db.orders, o, o.user_id == u.id))", db) ==
        Value(ValueList{Value(std::int64_t(2)), Value(std::int64_t(1)), Value(std::int64_t(1))}));
}

TEST_CASE("sort_by is stable and typed") {
  Database db = make_test_db();
  CHECK(evx("map(sort_by(db.orders, o, o.total), o, o.id)", db) ==
        Value(ValueList{Value(std::string("o2")), Value(std::string("o4")),
                        Value(std::string("o1")), Value(std::string("o3"))}));
  CHECK(evx("map(sort_by(db.orders, o, o.user_id), o, o.id)", db) ==
        Value(ValueList{Value(std::string("o1")), Value(std::string("o3")),
                        Value(std::string("o2")), Value(std::string("o4"))}));
  // equal keys keep document order
  CHECK(evx("map(sort_by(db.orders, o, 1), o, o.id)", db) ==
        Value(ValueList{Value(std::string("o1")), Value(std::string("o2")),
                        Value(std::string("o3")), Value(std::string("o4"))}));
  CHECK(evx_err("sort_by([1, \"a\"], x, x)", db) == "type_error");
}

TEST_CASE("field access and indexing report precise errors") {
  Database db = make_test_db();
  CHECK(evx("db.users[0].name", db) == Value(std::string("ada")));
  CHECK(evx("db.users[2].age", db) == Value(std::int64_t(51)));
  CHECK(evx_err("db.users[7]", db) == "not_found");
  CHECK(evx_err("db.users[-1]", db) == "not_found");
  CHECK(evx_err("db.users[0].salary", db) == "not_found");
  CHECK(evx_err("db.users[0].name.x", db) == "type_error");
  CHECK(evx_err("db.users[1.0]", db) == "type_error");
  CHECK(evx_err("db.ghosts", db) == "effect");
}

TEST_CASE("argument binding enforces the signature") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t(a: int, b?: string) -> int reads [] {\n"
      "  if b == null { return a }\n"
      "  return a + len(b)\n"
      "}");
  ValueObject args;
  args["a"] = Value(std::int64_t(5));
  EvalOutcome out = evaluate_program(*p, db, args);
  REQUIRE(out.ok);
  CHECK(out.value == Value(std::int64_t(5)));

  args["b"] = Value(std::string("xyz"));
  out = evaluate_program(*p, db, args);
  REQUIRE(out.ok);
  CHECK(out.value == Value(std::int64_t(8)));

  ValueObject bad1;  // missing required
  out = evaluate_program(*p, db, bad1);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "bad_args");

  ValueObject bad2;  // wrong kind
  bad2["a"] = Value(std::string("5"));
  out = evaluate_program(*p, db, bad2);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "bad_args");

  ValueObject bad3;  // unknown name
  bad3["a"] = Value(std::int64_t(1));
  bad3["zz"] = Value(std::int64_t(1));
  out = evaluate_program(*p, db, bad3);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "bad_args");

  ValueObject nul;  // null satisfies an optional param
  nul["a"] = Value(std::int64_t(2));
  nul["b"] = Value();
  out = evaluate_program(*p, db, nul);
  REQUIRE(out.ok);
  CHECK(out.value == Value(std::int64_t(2)));
}

TEST_CASE("declared return kinds are enforced at runtime") {
  Database db = make_test_db();
  auto p = parse_program("tool t(x) -> int { return x }");
  ValueObject args;
  args["x"] = Value(std::string("nope"));
  EvalOutcome out = evaluate_program(*p, db, args);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "type_error");
  args["x"] = Value(std::int64_t(3));
  out = evaluate_program(*p, db, args);
  REQUIRE(out.ok);
  CHECK(out.value == Value(std::int64_t(3)));
}

TEST_CASE("a tool without a return yields null") {
  Database db = make_test_db();
  auto p = parse_program("tool t() { let x = 1 }");
  EvalOutcome out = evaluate_program(*p, db, {});
  REQUIRE(out.ok);
  CHECK(out.value == Value());
}

TEST_CASE("return exits loops immediately") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t() reads [orders] {\n"
      "  for o in db.orders {\n"
      "    if o.status == \"shipped\" { return o.id }\n"
      "  }\n"
      "  return \"none\"\n"
      "}");
  EvalOutcome out = evaluate_program(*p, db, {});
  REQUIRE(out.ok);
  CHECK(out.value == Value(std::string("o2")));
}

TEST_CASE("insert appends, logs, and stays atomic") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t(uid: string) writes [users] {\n"
      "  insert(users, {\"id\": uid, \"name\": \"dara\", \"age\": 29, \"premium\": false})\n"
      "  return uid\n"
      "}");
  ValueObject args;
  args["uid"] = Value(std::string("u9"));
  EvalOutcome out = evaluate_program(*p, db, args);
  REQUIRE(out.ok);
  CHECK(out.db_after.collections.at("users").size() == 4);
  REQUIRE(out.writes.size() == 1);
  CHECK(out.writes[0].op == WriteOp::Op::Insert);
  CHECK(out.writes[0].collection == "users");
  CHECK(out.writes[0].doc_id == "u9");
  CHECK(out.writes[0].patch.find("name")->as_string() == "dara");
  CHECK(db.collections.at("users").size() == 3);  // input untouched

  // duplicate id: rejected, nothing committed
  args["uid"] = Value(std::string("u1"));
  out = evaluate_program(*p, db, args);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "schema");
  CHECK(out.db_after == db);
  CHECK(out.writes.empty());

  // schema violation: missing required field
  auto bad = parse_program(
      "tool t() writes [users] { insert(users, {\"id\": \"u8\", \"name\": \"eve\"}) }");
  out = evaluate_program(*bad, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "schema");
  CHECK(out.db_after == db);
}

TEST_CASE("update scans against pre-update state and logs in document order") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t() writes [orders] {\n"
      "  update(orders, o, o.status == \"open\", {\"status\": \"done\", \"total\": o.total + 1.0})\n"
      "  return null\n"
      "}");
  EvalOutcome out = evaluate_program(*p, db, {});
  REQUIRE(out.ok);
  REQUIRE(out.writes.size() == 2);
  CHECK(out.writes[0].doc_id == "o1");
  CHECK(out.writes[1].doc_id == "o3");
  CHECK(out.writes[0].patch.find("total")->as_float() == 20.5);
  CHECK(out.writes[1].patch.find("total")->as_float() == 43.25);
  const ValueList& orders = out.db_after.collections.at("orders");
  CHECK(orders[0].find("status")->as_string() == "done");
  CHECK(orders[1].find("status")->as_string() == "shipped");
  CHECK(orders[2].find("status")->as_string() == "done");

  // flipping the predicate field updates each matching doc exactly once
  auto flip = parse_program(
      "tool t() writes [users] { update(users, u, u.premium == false, {\"premium\": true}) }");
  out = evaluate_program(*flip, db, {});
  REQUIRE(out.ok);
  CHECK(out.writes.size() == 2);
  for (const auto& u : out.db_after.collections.at("users"))
    CHECK(u.find("premium")->as_bool() == true);

  // patches cannot touch the id
  auto bad = parse_program(
      "tool t() writes [orders] { update(orders, o, true, {\"id\": \"haha\"}) }");
  out = evaluate_program(*bad, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "schema");
  CHECK(out.db_after == db);

  // kind-violating patch is atomic too
  auto wrongkind = parse_program(
      "tool t() writes [orders] { update(orders, o, o.id == \"o1\", {\"total\": \"x\"}) }");
  out = evaluate_program(*wrongkind, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "schema");
  CHECK(out.db_after == db);
}

TEST_CASE("delete removes matches and logs them in original order") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t(uid: string) writes [orders] {\n"
      "  delete(orders, o, o.user_id == uid)\n"
      "  return null\n"
      "}");
  ValueObject args;
  args["uid"] = Value(std::string("u1"));
  EvalOutcome out = evaluate_program(*p, db, args);
  REQUIRE(out.ok);
  REQUIRE(out.writes.size() == 2);
  CHECK(out.writes[0].op == WriteOp::Op::Delete);
  CHECK(out.writes[0].doc_id == "o1");
  CHECK(out.writes[1].doc_id == "o3");
  CHECK(out.writes[0].patch == Value());
  const ValueList& left = out.db_after.collections.at("orders");
  REQUIRE(left.size() == 2);
  CHECK(left[0].find("id")->as_string() == "o2");
  CHECK(left[1].find("id")->as_string() == "o4");
}

TEST_CASE("failed calls leave no trace") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t() writes [users] {\n"
      "  insert(users, {\"id\": \"u7\", \"name\": \"gil\", \"age\": 40, \"premium\": true})\n"
      "  delete(users, u, u.id == \"u1\")\n"
      "  assert false, \"late failure\"\n"
      "}");
  Snapshot before = snapshot_database(db);
  EvalOutcome out = evaluate_program(*p, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "assert_failed");
  CHECK(out.error.message == "late failure");
  CHECK(out.writes.empty());
  CHECK(out.db_after == db);
  CHECK(snapshot_database(db).digest == before.digest);
}

TEST_CASE("effect discipline is enforced at runtime") {
  Database db = make_test_db();
  // parse-only programs dodge the static checker; the interpreter still refuses
  auto read_undeclared = parse_program("tool t() { return db.users }");
  EvalOutcome out = evaluate_program(*read_undeclared, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "effect");

  auto write_undeclared = parse_program("tool t() { delete(users, u, true) }");
  out = evaluate_program(*write_undeclared, db, {});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "effect");

  auto verifier_write = parse_program("verifier v(answer) { delete(users, u, true) }");
  out = evaluate_program(*verifier_write, db, {{"answer", Value()}});
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "effect");

  // update needs no read declaration for its own scan
  auto scan_only = parse_program(
      "tool t() writes [orders] { update(orders, o, o.status == \"open\", {\"status\": \"x\"}) }");
  out = evaluate_program(*scan_only, db, {});
  CHECK(out.ok);
}

TEST_CASE("step budget aborts runaway programs") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t() reads [orders] {\n"
      "  let total = 0\n"
      "  for a in db.orders {\n"
      "    for b in db.orders {\n"
      "      let total = total + 1\n"
      "    }\n"
      "  }\n"
      "  return total\n"
      "}");
  EvalLimits tight;
  tight.max_steps = 40;
  EvalOutcome out = evaluate_program(*p, db, {}, tight);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "step_budget");
  CHECK(out.db_after == db);
  // default budget is plenty
  out = evaluate_program(*p, db, {});
  CHECK(out.ok);
}

TEST_CASE("evaluation is deterministic") {
  Database db = make_test_db();
  auto p = parse_program(
      "tool t() reads [orders] writes [orders] {\n"
      "  update(orders, o, o.total > 10.0, {\"status\": \"big\"})\n"
      "  return {\"n\": count(db.orders, o, o.status == \"big\"), \"avg\": avg(map(db.orders, o, o.total))}\n"
      "}");
  EvalOutcome first = evaluate_program(*p, db, {});
  REQUIRE(first.ok);
  for (int i = 0; i < 5; ++i) {
    EvalOutcome again = evaluate_program(*p, db, {});
    REQUIRE(again.ok);
    CHECK(again.value == first.value);
    CHECK(again.db_after == first.db_after);
    CHECK(again.writes == first.writes);
    CHECK(canonical_dump(again.value) == canonical_dump(first.value));
  }
}

TEST_CASE("observation payloads wrap success and failure uniformly") {
  Database db = make_test_db();
  auto good = parse_program("tool t() { return 42 }");
  EvalOutcome out = evaluate_program(*good, db, {});
  CHECK(out.observation_payload() == Value(std::int64_t(42)));

  auto bad = parse_program("tool t() { return 1 / 0 }");
  out = evaluate_program(*bad, db, {});
  Value payload = out.observation_payload();
  REQUIRE(payload.kind() == Kind::Object);
  CHECK(payload.find("error")->as_string() == "div_zero");
  CHECK(payload.find("message")->kind() == Kind::String);
}

TEST_CASE("write logs replay exactly") {
  Database db = make_test_db();
  const char* programs[] = {
      "tool t() writes [users] { insert(users, {\"id\": \"u4\", \"name\": \"kim\", \"age\": 33, \"premium\": true}) }",
      "tool t() writes [orders] { update(orders, o, o.total < 10.0, {\"status\": \"cheap\"}) }",
      "tool t() writes [orders] { delete(orders, o, o.user_id == \"u1\") }",
      "tool t() reads [users] writes [users, orders] {\n"
      "  update(users, u, u.premium, {\"age\": u.age + 1})\n"
      "  insert(orders, {\"id\": \"o9\", \"user_id\": \"u2\", \"total\": 3.5, \"status\": \"open\"})\n"
      "  delete(users, u, u.age < 30)\n"
      "}",
  };
  for (const char* src : programs) {
    CAPTURE(src);
    auto p = parse_program(src);
    EvalOutcome out = evaluate_program(*p, db, {});
    REQUIRE(out.ok);
    CHECK(apply_write_ops(db, out.writes) == out.db_after);
    CHECK(replay_oracle(db, out.writes) == out.db_after);
  }

  // chains: thread db_after forward, replay the concatenated log from the start
  Database cur = db;
  std::vector<WriteOp> all;
  for (const char* src : programs) {
    auto p = parse_program(src);
    EvalOutcome out = evaluate_program(*p, cur, {});
    REQUIRE(out.ok);
    for (const auto& w : out.writes) all.push_back(w);
    cur = out.db_after;
  }
  CHECK(apply_write_ops(db, all) == cur);
  CHECK(replay_oracle(db, all) == cur);
}

TEST_CASE("write op and unit case serialization round-trips") {
  WriteOp ins{WriteOp::Op::Insert, "users", "u5", obj({{"id", Value(std::string("u5"))}})};
  WriteOp upd{WriteOp::Op::Update, "orders", "o1", obj({{"status", Value(std::string("done"))}})};
  WriteOp del{WriteOp::Op::Delete, "orders", "o2", Value()};
  for (const auto& w : {ins, upd, del}) {
    CHECK(WriteOp::from_value(w.to_value()) == w);
  }
  CHECK(canonical_dump(del.to_value()) ==
        "{\"collection\":\"orders\",\"doc_id\":\"o2\",\"kind\":\"delete\",\"patch\":null}");

  UnitCase c1;
  c1.args["x"] = Value(std::int64_t(3));
  c1.expect_value = Value(std::int64_t(6));
  UnitCase c2;
  c2.expect_writes = std::vector<WriteOp>{upd, del};
  for (const auto& c : {c1, c2}) {
    UnitCase back = UnitCase::from_value(c.to_value());
    CHECK(back.args == c.args);
    CHECK(back.expect_value == c.expect_value);
    CHECK(back.expect_writes == c.expect_writes);
  }
  CHECK_THROWS_AS(UnitCase::from_value(Value(std::int64_t(3))), ValueError);
  CHECK_THROWS_AS(WriteOp::from_value(obj({{"kind", Value(std::string("upsert"))}})), ValueError);
}

TEST_CASE("unit test accuracy counts exact matches") {
  Database db = make_test_db();
  auto dbl = parse_program("tool dbl(x: int) -> int { return x * 2 }");
  std::vector<UnitCase> cases(3);
  cases[0].args["x"] = Value(std::int64_t(1));
  cases[0].expect_value = Value(std::int64_t(2));
  cases[1].args["x"] = Value(std::int64_t(2));
  cases[1].expect_value = Value(std::int64_t(4));
  cases[2].args["x"] = Value(std::int64_t(3));
  cases[2].expect_value = Value(std::int64_t(7));  // deliberately wrong
  CHECK(run_unit_tests(*dbl, cases, db) == doctest::Approx(2.0 / 3.0));

  // kind mismatch fails a case even when numerically equal
  std::vector<UnitCase> strict(1);
  strict[0].args["x"] = Value(std::int64_t(1));
  strict[0].expect_value = Value(2.0);
  CHECK(run_unit_tests(*dbl, strict, db) == 0.0);

  // write expectations compare the full effect log
  auto cancel = parse_program(
      "tool cancel(order_id: string) writes [orders] {\n"
      "  update(orders, o, o.id == order_id, {\"status\": \"cancelled\"})\n"
      "  return null\n"
      "}");
  std::vector<UnitCase> wcases(2);
  wcases[0].args["order_id"] = Value(std::string("o2"));
  wcases[0].expect_writes = std::vector<WriteOp>{
      {WriteOp::Op::Update, "orders", "o2", obj({{"status", Value(std::string("cancelled"))}})}};
  wcases[1].args["order_id"] = Value(std::string("o2"));
  wcases[1].expect_writes = std::vector<WriteOp>{
      {WriteOp::Op::Update, "orders", "o2", obj({{"status", Value(std::string("wrong"))}})}};
  CHECK(run_unit_tests(*cancel, wcases, db) == 0.5);

  // errors count as failures
  auto throwy = parse_program("tool t(x: int) -> int { return 1 / x }");
  std::vector<UnitCase> ecases(2);
  ecases[0].args["x"] = Value(std::int64_t(1));
  ecases[0].expect_value = Value(std::int64_t(1));
  ecases[1].args["x"] = Value(std::int64_t(0));
  ecases[1].expect_value = Value(std::int64_t(0));
  CHECK(run_unit_tests(*throwy, ecases, db) == 0.5);
}

namespace {

ToolCandidate candidate_with_accuracy(const std::string& name, int pass, int total) {
  // tool returning x+1; expected values are wrong for (total - pass) cases
  ToolCandidate c;
  c.source = "tool " + name + "(x: int) -> int { return x + 1 }";
  for (int i = 0; i < total; ++i) {
    UnitCase uc;
    uc.args["x"] = Value(std::int64_t(i));
    uc.expect_value = Value(std::int64_t(i < pass ? i + 1 : -1));
    c.cases.push_back(std::move(uc));
  }
  return c;
}

}  // namespace

TEST_CASE("the retention filter keeps exactly the strict majority") {
  Database db = make_test_db();
  std::vector<ToolCandidate> cands;
  cands.push_back(candidate_with_accuracy("perfect", 4, 4));   // 1.0
  cands.push_back(candidate_with_accuracy("coinflip", 2, 4));  // 0.5 — dropped
  cands.push_back(candidate_with_accuracy("broken", 0, 4));    // 0.0 — dropped
  cands.push_back(candidate_with_accuracy("decent", 3, 4));    // 0.75
  FilterResult res = filter_toolset(cands, db);
  REQUIRE(res.retained.size() == 2);
  CHECK(res.retained[0].sig().name == "perfect");
  CHECK(res.retained[1].sig().name == "decent");
  REQUIRE(res.reports.size() == 4);
  CHECK(res.reports[0].retained);
  CHECK_FALSE(res.reports[1].retained);
  CHECK(res.reports[1].accuracy == 0.5);
  CHECK(res.reports[1].reason.find("0.5") != std::string::npos);
  CHECK_FALSE(res.reports[2].retained);
  CHECK(res.reports[3].retained);
  for (const auto& r : res.reports) {
    CHECK(r.parsed);
    CHECK(r.checked);
  }
}

TEST_CASE("the retention filter reports malformed candidates") {
  Database db = make_test_db();
  std::vector<ToolCandidate> cands;

  ToolCandidate unparsable;
  unparsable.source = "tool oops(x: int { return x }";
  cands.push_back(unparsable);

  ToolCandidate uncheckable;
  uncheckable.source = "tool nope() { return db.users }";
  UnitCase uc;
  uc.expect_value = Value();
  uncheckable.cases.push_back(uc);
  cands.push_back(uncheckable);

  ToolCandidate untested;
  untested.source = "tool lonely() -> int { return 1 }";
  cands.push_back(untested);

  cands.push_back(candidate_with_accuracy("keeper", 3, 3));
  cands.push_back(candidate_with_accuracy("keeper", 3, 3));  // duplicate name

  FilterResult res = filter_toolset(cands, db);
  REQUIRE(res.retained.size() == 1);
  CHECK(res.retained[0].sig().name == "keeper");
  REQUIRE(res.reports.size() == 5);
  CHECK_FALSE(res.reports[0].parsed);
  CHECK(res.reports[0].name == "oops");
  CHECK(res.reports[0].reason.find("parse error") == 0);
  CHECK(res.reports[1].parsed);
  CHECK_FALSE(res.reports[1].checked);
  CHECK(res.reports[1].reason.find("check error") == 0);
  CHECK(res.reports[2].reason == "no unit cases");
  CHECK(res.reports[3].retained);
  CHECK(res.reports[4].reason == "duplicate tool name");

  // nothing retained: the environment is rejected with the full report
  std::vector<ToolCandidate> hopeless;
  hopeless.push_back(candidate_with_accuracy("bad", 1, 4));
  hopeless.push_back(unparsable);
  try {
    filter_toolset(hopeless, db);
    FAIL("expected EnvironmentRejected");
  } catch (const EnvironmentRejected& e) {
    CHECK(e.reports.size() == 2);
    CHECK(e.reports[0].accuracy == 0.25);
  }
}

TEST_CASE("verifiers run against the database and an answer binding") {
  Database db = make_test_db();
  auto v = parse_program(
      "verifier open_total(answer) reads [orders] {\n"
      "  let expected = sum(map(filter(db.orders, o, o.status == \"open\"), o, o.total))\n"
      "  assert answer == expected, \"wrong total\"\n"
      "}");
  CHECK_NOTHROW(check_program(*v, &db));
  ValueObject args;
  args["answer"] = Value(19.5 + 42.25);
  EvalOutcome out = evaluate_program(*v, db, args);
  CHECK(out.ok);

  args["answer"] = Value(0.0);
  out = evaluate_program(*v, db, args);
  CHECK_FALSE(out.ok);
  CHECK(out.error.code == "assert_failed");
  CHECK(out.error.message == "wrong total");
}
