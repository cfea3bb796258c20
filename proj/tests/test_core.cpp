#include <doctest.h>

#include "modelterm/ast.hpp"
#include "modelterm/eval.hpp"

using namespace mt;

TEST_CASE("terms are hashconsed") {
  Var i = fresh_var("i");
  Expr a = add(bvar(i), int_lit(1));
  Expr b = add(bvar(i), int_lit(1));
  CHECK(a == b);
  CHECK_FALSE(a == add(bvar(i), int_lit(2)));
  CHECK(term_size(a) == 3);
}

TEST_CASE("fresh variables never collide") {
  Var a = fresh_var("i");
  Var b = fresh_var("i");
  CHECK(a.name == b.name);
  CHECK(a.nonce != b.nonce);
  Var c = refresh(Var{"i", 3, a.nonce});
  CHECK(c.offset == 0);
  CHECK(c.nonce != a.nonce);
}

TEST_CASE("tuple patterns need two components") {
  CHECK_THROWS_AS(Pattern::tuple({Pattern::var(fresh_var("x"))}), ShapeError);
  auto p = Pattern::tuple({Pattern::var(fresh_var("x")), Pattern::var(fresh_var("y"))});
  CHECK(p.vars().size() == 2);
  auto q = p.refreshed();
  CHECK(q.vars()[0].nonce != p.vars()[0].nonce);
  CHECK(as_pattern(pattern_expr(p)) == p);
  CHECK_FALSE(as_pattern(int_lit(3)).has_value());
}

TEST_CASE("open substitutes pattern components") {
  Var x = fresh_var("x"), y = fresh_var("y");
  auto p = Pattern::tuple({Pattern::var(x), Pattern::var(y)});
  Expr body = add(bvar(x), mul(bvar(y), int_lit(2)));
  Expr t = tuple({fvar("a"), fvar("b")});
  CHECK(open(body, p, t) == add(fvar("a"), mul(fvar("b"), int_lit(2))));
  CHECK_THROWS_AS(open(body, p, fvar("pair")), ShapeError);
}

TEST_CASE("substitution leaves other variables alone") {
  Var x = fresh_var("x"), y = fresh_var("y");
  Expr e = index(fvar("w"), {bvar(x), bvar(y)});
  Expr s = substitute(e, {{x, int_lit(0)}});
  CHECK(s == index(fvar("w"), {int_lit(0), bvar(y)}));
  CHECK(vars_of(s) == std::set<Var>{y});
}

TEST_CASE("natural sources") {
  std::set<std::string> sets{"C"};
  CHECK(is_natural_source(fvar("N"), sets));
  CHECK_FALSE(is_natural_source(fvar("C"), sets));
  CHECK(is_natural_source(prim(PrimOp::Count, {fvar("C")}), sets));
  CHECK(is_natural_source(int_lit(4), sets));
  CHECK_FALSE(is_natural_source(index(fvar("AT"), {int_lit(0)}), sets));
}

TEST_CASE("s-expressions name bound variables by nonce") {
  Var i{"i", 0, 42};
  CHECK(to_sexpr(lt(bvar(i), fvar("N"))) == "(< i_42 N)");
  CHECK(to_sexpr(index(fvar("x"), {bvar(i)})) == "x[i_42]");
}

TEST_CASE("evaluation of streams") {
  Env env{{"N", Value::integer(5)}};
  Var i = fresh_var("i");
  Expr evens = filter(lam(Pattern::var(i), eq(mod(bvar(i), int_lit(2)), int_lit(0))), fvar("N"));
  Expr squares = map(lam(Pattern::var(i), mul(bvar(i), bvar(i))), evens);
  CHECK(evaluate(sum(squares), env).as_int() == 0 + 4 + 16);
  auto items = stream_items(evaluate(squares, env));
  REQUIRE(items.size() == 3);
  CHECK(items[2].as_int() == 16);
}

TEST_CASE("flat_map nests loops in order") {
  Env env{{"N", Value::integer(2)}, {"M", Value::integer(3)}};
  Var i = fresh_var("i"), j = fresh_var("j");
  Expr inner = map(lam(Pattern::var(j), tuple({bvar(i), bvar(j)})), fvar("M"));
  Expr pairs = flat_map(lam(Pattern::var(i), inner), fvar("N"));
  auto items = stream_items(evaluate(pairs, env));
  REQUIRE(items.size() == 6);
  CHECK(items[4] == Value::tuple({Value::integer(1), Value::integer(1)}));
}

TEST_CASE("sums over empty streams are zero") {
  Env env{{"N", Value::integer(0)}};
  Var i = fresh_var("i");
  CHECK(evaluate(sum(map(lam(Pattern::var(i), bvar(i)), fvar("N"))), env).as_int() == 0);
}

TEST_CASE("for_each_solution binds memberships, guards and lets") {
  Env env{{"S", Value::set({Value::integer(3), Value::integer(1), Value::integer(4)})}};
  Var a = fresh_var("a"), b = fresh_var("b");
  std::vector<Expr> conds = {mem(bvar(a), fvar("S")), guard(lt(int_lit(1), bvar(a))),
                             let(bvar(b), add(bvar(a), int_lit(10)))};
  std::vector<std::int64_t> seen;
  for_each_solution(conds, env, {}, [&](const BoundEnv& be) { seen.push_back(be.at(b).as_int()); });
  CHECK(seen == std::vector<std::int64_t>{13, 14});
}

TEST_CASE("a let on a bound variable acts as a filter") {
  Env env{{"N", Value::integer(4)}};
  Var a = fresh_var("a");
  std::vector<Expr> conds = {mem(bvar(a), fvar("N")), let(bvar(a), int_lit(2))};
  int n = 0;
  for_each_solution(conds, env, {}, [&](const BoundEnv&) { ++n; });
  CHECK(n == 1);
}

TEST_CASE("evaluation errors") {
  Env env;
  CHECK_THROWS_AS(evaluate(fvar("missing"), env), EvalError);
  CHECK_THROWS_AS(evaluate(bvar(fresh_var("u")), env), EvalError);
  Env arr{{"w", Value::seq({Value::integer(1)})}};
  CHECK_THROWS_AS(evaluate(index(fvar("w"), {int_lit(3)}), arr), EvalError);
}
