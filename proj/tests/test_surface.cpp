#include <doctest.h>

#include <random>

#include "modelterm/ensugar.hpp"
#include "modelterm/eval.hpp"
#include "modelterm/surface.hpp"
#include "oracles.hpp"

using namespace mt;

namespace {

const char* kEven = R"(
problem "even" min;
param N; param M; param x[N]; param t[N, M];
objective: sum(x[i] * t[i, j] for i in N if i mod 2 == 0 for j in M);
)";

}  // namespace

TEST_CASE("header and declarations") {
  auto m = load_model(R"(
    # comment
    problem "demo" max;
    set C : "cities";
    binvar x[count(C), C] : "tour";
    var y[C] in [0, inf];
    param d[C, C];
    objective: sum(y[c] for c in C);
  )");
  CHECK(m.name == "demo");
  CHECK(m.sense == Sense::Maximize);
  REQUIRE(m.declarations.size() == 4);
  CHECK(m.declarations[0].kind == DeclKind::CategorySet);
  CHECK(m.declarations[1].kind == DeclKind::BinaryVar);
  CHECK(m.declarations[1].dims.size() == 2);
  CHECK(m.declarations[1].description == "tour");
  REQUIRE(m.declarations[2].bounds.has_value());
  CHECK(std::isinf(m.declarations[2].bounds->second.float_value()));
  CHECK(m.set_symbols() == std::set<std::string>{"C"});
  CHECK(m.find("d") != nullptr);
  CHECK(m.find("nope") == nullptr);
}

TEST_CASE("constraints") {
  auto m = load_model(R"(
    problem "c" min;
    param N; binvar x[N];
    objective: 0;
    constraint "single": sum(x[i] for i in N) <= 1;
    constraint "each" forall (i in N): x[i] >= 0;
    constraint "pairs" forall ((i, j) in [(i, j) for i in N for j in N if i < j]): x[i] + x[j] <= 1;
  )");
  REQUIRE(m.constraints.size() == 3);
  CHECK_FALSE(m.constraints[0].parametrized());
  CHECK(m.constraints[0].cmp == Cmp::Le);
  CHECK(m.constraints[1].parametrized());
  CHECK(m.constraints[1].cmp == Cmp::Ge);
  CHECK(m.constraints[2].index_patterns.front().is_tuple());
  CHECK(m.constraints[2].domain.is(ExprKind::Map));
}

TEST_CASE("parse errors carry positions") {
  try {
    load_model("problem \"p\" min;\nparam N;\nobjective: N +;\n");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_model("problem p min;"), ParseError);
  CHECK_THROWS_AS(load_model("problem \"p\" min; param N; param N; objective: 0;"), ParseError);
  CHECK_THROWS_AS(load_model("problem \"p\" min; objective: y;"), ParseError);
  CHECK_THROWS_AS(load_model("problem \"p\" min; param N; objective: 0; constraint \"c\": N < 1;"), ParseError);
}

TEST_CASE("comprehensions desugar to map, flat_map and filter") {
  auto m = load_model(kEven);
  Expr obj = m.objective;
  REQUIRE(obj.is(ExprKind::Sum));
  Expr s = obj.child(0);
  CHECK(s.is(ExprKind::Map));
  CHECK(s.child(1).is(ExprKind::FlatMap));
  Env env{{"N", Value::integer(4)},
          {"M", Value::integer(2)},
          {"x", Value::seq({Value::integer(1), Value::integer(2), Value::integer(3), Value::integer(4)})},
          {"t", Value::seq({Value::seq({Value::integer(1), Value::integer(1)}),
                            Value::seq({Value::integer(2), Value::integer(2)}),
                            Value::seq({Value::integer(3), Value::integer(3)}),
                            Value::seq({Value::integer(4), Value::integer(4)})})}};
  // i in {0, 2}: 1*(1+1) + 3*(3+3)
  CHECK(evaluate(obj, env).as_int() == 20);
}

TEST_CASE("shadowed generator names refer to the innermost binding") {
  auto sm = parse_model(oracle::wrap_objective("[i for i in N for i in M]"));
  auto m = desugar_model(sm);
  oracle::Data d;
  d.N = 2;
  d.M = 3;
  auto got = oracle::to_items(evaluate(m.objective, d.env()));
  CHECK(got == oracle::run_comprehension(*sm.objective->compr, d));
  CHECK(got.size() == 6);
  CHECK(got[5] == oracle::Item{2});
}

TEST_CASE("desugared comprehensions agree with the loop oracle") {
  std::mt19937 rng(20240611);
  int checked = 0;
  for (int n = 0; n < 150; ++n) {
    auto text = oracle::random_comprehension(rng);
    auto sm = parse_model(oracle::wrap_objective(text));
    auto m = desugar_model(sm);
    for (int e = 0; e < 4; ++e) {
      auto d = oracle::random_data(rng);
      INFO(text);
      CHECK(oracle::to_items(evaluate(m.objective, d.env())) ==
            oracle::run_comprehension(*sm.objective->compr, d));
      ++checked;
    }
  }
  CHECK(checked == 600);
}
