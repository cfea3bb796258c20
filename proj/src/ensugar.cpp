#include "modelterm/ensugar.hpp"

#include "modelterm/engine.hpp"

namespace mt {

namespace {

constexpr const char* kOptimizerRules = R"(
(relation concludes (Expr))
(relation member (Expr Expr))
(relation assume (Condition))
(relation assumeMany (Conditions))

(with-ruleset ensugar-basic
  (rule ((assumeMany (CCons c cs))) ((assume c) (assumeMany cs)))
  (rule ((member (Tuple (Cons l ls)) (Tuple (Cons r rs))))
    ((member l r) (member (Tuple ls) (Tuple rs))))
  (rule ((assume (Mem l r))) ((member l r)))
  (rule ((assume (Let (Tuple (Cons p ps)) (Tuple (Cons e es)))))
    ((assume (Let p e)) (assume (Let (Tuple ps) (Tuple es)))))
  (rule ((= (Tuple ps) (Tuple es))) ((union ps es)))
  (rule ((= (BVar v) (BVar u))) ((union v u))))

(with-ruleset comprehension
  (rule ((= t (MkVar v i n))) ((set-cost (MkVar v i n) i))))

(with-ruleset equate-and-dedupe
  (rule ((assume (Let (BVar v) (BVar u)))) ((union (BVar v) (BVar u))))
  (rule ((= c (CCons (Let x x) cs))) ((union c cs) (subsume (CCons (Let x x) cs)))))

(rule
  ((concludes (BVar v)) (= let_var (Let (BVar v) e)) (!= (BVar v) e)
   (assumeMany (CCons let_var (CNil))))
  ((union (BVar v) e) (subsume (BVar v)) (union (CCons let_var (CNil)) (CNil)))
  :ruleset inline-trailing)
)";

const RuleProgram& optimizer_program() {
  static const RuleProgram p = parse_rules(kOptimizerRules);
  return p;
}

CostModel optimizer_costs() {
  CostModel cm;
  cm.op_costs["Let"] = 100;
  cm.op_costs["Mem"] = 1;
  cm.op_costs["If"] = 1;
  return cm;
}

Pattern fresh_like(Expr lam_expr) { return lam_expr.pattern().refreshed(); }

bool streamable(Expr e) {
  switch (e.kind()) {
    case ExprKind::Lam:
    case ExprKind::Tuple:
    case ExprKind::BoolLit:
    case ExprKind::FloatLit:
    case ExprKind::Mem:
    case ExprKind::If:
    case ExprKind::Let:
      return false;
    case ExprKind::Prim:
      switch (e.op()) {
        case PrimOp::Eq:
        case PrimOp::Neq:
        case PrimOp::Lt:
        case PrimOp::Le:
        case PrimOp::And:
        case PrimOp::Or:
        case PrimOp::Not:
          return false;
        default:
          return true;
      }
    default:
      return true;
  }
}

void append(std::vector<Expr>& to, const std::vector<Expr>& from) {
  to.insert(to.end(), from.begin(), from.end());
}

}  // namespace

Comprehension Comprehension::from_expr(Expr e) {
  if (!e.is(ExprKind::Compr)) throw ShapeError("not a comprehension: " + to_sexpr(e));
  auto kids = e.children();
  return {kids[0], {kids.begin() + 1, kids.end()}};
}

std::vector<Expr> ensugar_membership(Expr p, Expr e) {
  if (e.is(ExprKind::Map) || e.is(ExprKind::FlatMap) || e.is(ExprKind::Filter)) {
    Expr fn = e.child(0);
    Expr src = e.child(1);
    Pattern q = fn.pattern();
    Expr b = pattern_expr(fresh_like(fn));
    Expr body = open(fn.child(0), q, b);
    auto out = ensugar_membership(b, src);
    if (e.is(ExprKind::Map)) {
      out.push_back(let(p, body));
    } else if (e.is(ExprKind::FlatMap)) {
      append(out, ensugar_membership(p, body));
    } else {
      out.push_back(guard(body));
      out.push_back(let(p, b));
    }
    return out;
  }
  return {mem(p, e)};
}

Comprehension ensugar_expr(Expr e) {
  if (e.is(ExprKind::Map) || e.is(ExprKind::FlatMap) || e.is(ExprKind::Filter)) {
    Expr fn = e.child(0);
    Expr a = pattern_expr(fresh_like(fn));
    Expr body = open(fn.child(0), fn.pattern(), a);
    Comprehension c;
    c.conditions = ensugar_membership(a, e.child(1));
    if (e.is(ExprKind::Map)) {
      c.head = body;
    } else if (e.is(ExprKind::FlatMap)) {
      auto inner = ensugar_expr(body);
      append(c.conditions, inner.conditions);
      c.head = inner.head;
    } else {
      c.head = a;
      c.conditions.push_back(guard(body));
    }
    return c;
  }
  if (!streamable(e)) throw ShapeError("not a stream: " + to_sexpr(e));
  Expr a = bvar(fresh_var("x"));
  return {a, {mem(a, e)}};
}

std::vector<Var> introduced_vars(std::span<const Expr> conditions) {
  std::vector<Var> out;
  std::set<Var> seen;
  for (auto c : conditions) {
    if (!c.is(ExprKind::Mem) && !c.is(ExprKind::Let)) continue;
    auto p = as_pattern(c.child(0));
    if (!p) continue;
    for (const auto& v : p->vars()) {
      if (seen.insert(v).second) out.push_back(v);
    }
  }
  return out;
}

Comprehension assign_offsets(const Comprehension& c) {
  // Introducing conditions, counted from the end.
  std::vector<std::vector<Var>> groups;
  std::set<Var> seen;
  for (auto cond : c.conditions) {
    if (!cond.is(ExprKind::Mem) && !cond.is(ExprKind::Let)) continue;
    auto p = as_pattern(cond.child(0));
    if (!p) continue;
    std::vector<Var> fresh;
    for (const auto& v : p->vars()) {
      if (seen.insert(v).second) fresh.push_back(v);
    }
    if (!fresh.empty()) groups.push_back(std::move(fresh));
  }
  Subst s;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto offset = static_cast<std::uint32_t>(groups.size() - 1 - k);
    for (const auto& v : groups[k]) {
      if (v.offset != offset) s[v] = bvar(Var{v.name, offset, v.nonce});
    }
  }
  if (s.empty()) return c;
  Comprehension out{substitute(c.head, s), {}};
  for (auto cond : c.conditions) out.conditions.push_back(substitute(cond, s));
  return out;
}

OptimizeOutcome optimize_comprehension(const Comprehension& c, const OptimizeOptions& o) {
  EGraph g;
  g.add_program(optimizer_program());
  ClassId root = g.add_term(c.to_expr());
  auto top = g.lookup_term_node(c.to_expr());
  g.assert_fact("concludes", {g.node(*top).kids[0]});
  g.assert_fact("assumeMany", {g.node(*top).kids[1]});

  RunLimits lim{o.iteration_limit, o.deadline};
  for (const auto& stage : std::vector<std::vector<std::string>>{
           {"ensugar-basic", "comprehension"}, {"equate-and-dedupe"}, {"inline-trailing"}}) {
    if (!g.run_rulesets(stage, lim).saturated) return {c, true};
  }
  return {Comprehension::from_expr(g.extract_expr(root, optimizer_costs())), false};
}

double comprehension_cost(const Comprehension& c) {
  EGraph g;
  g.add_program(optimizer_program());
  ClassId root = g.add_term(c.to_expr());
  g.run_ruleset("comprehension");
  return g.extract(root, optimizer_costs()).cost;
}

// ---------------------------------------------------------------------------

namespace {

Comprehension finish(Comprehension c, const EnsugarOptions& o, EnsugarStats& st) {
  c.head = ensugar_sums(c.head, o, &st);
  for (auto& cond : c.conditions) cond = ensugar_sums(cond, o, &st);
  c = assign_offsets(c);
  ++st.comprehensions;
  if (!o.optimize) return c;
  auto r = optimize_comprehension(c, o.limits);
  if (r.fell_back) ++st.fallbacks;
  return r.result;
}

}  // namespace

Expr ensugar_sums(Expr e, const EnsugarOptions& o, EnsugarStats* stats) {
  EnsugarStats local;
  EnsugarStats& st = stats ? *stats : local;
  if (e.is(ExprKind::Sum) && !e.child(0).is(ExprKind::Compr)) {
    return sum(finish(ensugar_expr(e.child(0)), o, st).to_expr());
  }
  if (e.children().empty()) return e;
  std::vector<Expr> kids;
  bool changed = false;
  for (auto k : e.children()) {
    kids.push_back(ensugar_sums(k, o, &st));
    changed = changed || !(kids.back() == k);
  }
  return changed ? with_children(e, std::move(kids)) : e;
}

EnsugaredModel ensugar_model(const Model& m, const EnsugarOptions& o) {
  EnsugaredModel out{m, {}, {}, {}};
  out.objective = m.objective ? ensugar_sums(m.objective, o, &out.stats) : m.objective;
  for (const auto& k : m.constraints) {
    EnsugaredConstraint ec{k.name, {}, ensugar_sums(k.lhs, o, &out.stats), k.cmp,
                           ensugar_sums(k.rhs, o, &out.stats)};
    if (k.parametrized()) {
      Expr target = pattern_expr(k.index_patterns.front());
      Comprehension c{tuple({ec.lhs, ec.rhs}), ensugar_membership(target, k.domain)};
      c = finish(c, o, out.stats);
      ec.conditions = c.conditions;
      ec.lhs = c.head.child(0);
      ec.rhs = c.head.child(1);
    }
    out.constraints.push_back(std::move(ec));
  }
  return out;
}

}  // namespace mt
