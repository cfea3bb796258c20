#include <doctest.h>

#include <random>

#include "modelterm/ensugar.hpp"
#include "modelterm/eval.hpp"
#include "modelterm/surface.hpp"
#include "oracles.hpp"

using namespace mt;

namespace {

Expr even_stream() {
  auto m = load_model(R"(
    problem "even" min;
    param N; param M; param x[N]; param t[N, M];
    objective: sum(x[i] * t[i, j] for i in N if i mod 2 == 0 for j in M);
  )");
  return m.objective.child(0);
}

int count_kind(const Comprehension& c, ExprKind k) {
  int n = 0;
  for (auto e : c.conditions) n += e.is(k);
  return n;
}

}  // namespace

TEST_CASE("naive ensugaring of the even-index sum") {
  auto c = ensugar_expr(even_stream());
  REQUIRE(c.conditions.size() == 5);
  auto& k = c.conditions;
  CHECK(k[0].is(ExprKind::Mem));
  CHECK(k[0].child(1) == fvar("N"));
  CHECK(k[1].is(ExprKind::If));
  CHECK(k[2].is(ExprKind::Let));
  CHECK(k[2].child(1) == k[0].child(0));
  CHECK(k[3].is(ExprKind::Mem));
  CHECK(k[3].child(1) == fvar("M"));
  CHECK(k[4].is(ExprKind::Let));
  CHECK(k[4].child(0).is(ExprKind::Tuple));
  CHECK(k[4].child(1) == tuple({k[2].child(0), k[3].child(0)}));
  CHECK(introduced_vars(c.conditions).size() == 5);
}

TEST_CASE("offsets count introducing conditions from the end") {
  auto c = assign_offsets(ensugar_expr(even_stream()));
  std::vector<std::uint32_t> offs;
  for (auto v : introduced_vars(c.conditions)) offs.push_back(v.offset);
  CHECK(offs == std::vector<std::uint32_t>{3, 2, 1, 0, 0});
}

TEST_CASE("optimization removes every let from the even-index sum") {
  auto c = assign_offsets(ensugar_expr(even_stream()));
  auto r = optimize_comprehension(c);
  CHECK_FALSE(r.fell_back);
  CHECK(count_kind(r.result, ExprKind::Let) == 0);
  CHECK(count_kind(r.result, ExprKind::Mem) == 2);
  CHECK(count_kind(r.result, ExprKind::If) == 1);
  CHECK(comprehension_cost(r.result) < comprehension_cost(c));
}

TEST_CASE("optimization falls back when the limit is hit") {
  auto c = assign_offsets(ensugar_expr(even_stream()));
  auto r = optimize_comprehension(c, OptimizeOptions{1, std::nullopt});
  CHECK(r.fell_back);
  CHECK(r.result == c);
}

TEST_CASE("membership in a filtered stream splits into pieces") {
  Var i = fresh_var("i"), j = fresh_var("j");
  Expr s = filter(lam(Pattern::var(j), eq(mod(bvar(j), int_lit(2)), int_lit(0))), fvar("N"));
  auto conds = ensugar_membership(bvar(i), s);
  REQUIRE(conds.size() == 3);
  CHECK(conds[0].is(ExprKind::Mem));
  CHECK(conds[1].is(ExprKind::If));
  CHECK(conds[2] == let(bvar(i), conds[0].child(0)));
  CHECK(ensugar_membership(bvar(i), fvar("N")) == std::vector<Expr>{mem(bvar(i), fvar("N"))});
}

TEST_CASE("non-streams cannot be ensugared") {
  CHECK_THROWS_AS(ensugar_expr(bool_lit(true)), ShapeError);
  CHECK_THROWS_AS(ensugar_expr(lt(int_lit(1), int_lit(2))), ShapeError);
  auto plain = ensugar_expr(fvar("N"));
  CHECK(plain.conditions.size() == 1);
  CHECK(plain.head == plain.conditions[0].child(0));
}

TEST_CASE("comprehension conversion round-trips") {
  auto c = ensugar_expr(even_stream());
  CHECK(Comprehension::from_expr(c.to_expr()) == c);
  CHECK_THROWS_AS(Comprehension::from_expr(int_lit(1)), ShapeError);
}

TEST_CASE("model ensugaring covers objectives and constraints") {
  auto m = load_model(R"(
    problem "m" min;
    param N; binvar x[N];
    objective: sum(x[i] for i in N);
    constraint "one": sum(x[i] for i in N if i < 3) <= 1;
    constraint "each" forall (i in [k for k in N if k != 2]): x[i] <= 1;
  )");
  auto em = ensugar_model(m);
  CHECK(em.objective.child(0).is(ExprKind::Compr));
  REQUIRE(em.constraints.size() == 2);
  CHECK(em.constraints[0].conditions.empty());
  CHECK(em.constraints[0].lhs.child(0).is(ExprKind::Compr));
  CHECK(em.constraints[1].bound().size() == 1);
  for (auto k : em.constraints[1].conditions) CHECK_FALSE(k.is(ExprKind::Let));
  CHECK(em.stats.comprehensions == 3);
  CHECK(em.stats.fallbacks == 0);
}

TEST_CASE("ensugared and optimized comprehensions keep their value") {
  std::mt19937 rng(99);
  for (int n = 0; n < 120; ++n) {
    auto text = oracle::random_comprehension(rng);
    auto sm = parse_model(oracle::wrap_objective(text));
    auto m = desugar_model(sm);
    auto naive = assign_offsets(ensugar_expr(m.objective));
    auto opt = optimize_comprehension(naive);
    INFO(text);
    CHECK_FALSE(opt.fell_back);
    for (int e = 0; e < 3; ++e) {
      auto d = oracle::random_data(rng);
      auto expect = oracle::run_comprehension(*sm.objective->compr, d);
      CHECK(oracle::to_items(evaluate(naive.to_expr(), d.env())) == expect);
      CHECK(oracle::to_items(evaluate(opt.result.to_expr(), d.env())) == expect);
    }
  }
}
