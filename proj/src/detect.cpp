#include "modelterm/detect.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "modelterm/default_rules.hpp"
#include "modelterm/ensugar.hpp"

namespace mt {

namespace {

constexpr const char* kLess = "<";
constexpr const char* kLessEq = "<=";
constexpr const char* kEqual = "==";
constexpr const char* kDiffer = "<>";
constexpr const char* kMember = "member";
constexpr const char* kHolds = "holds";
constexpr const char* kBinary = "binary_vars";
constexpr const char* kNonneg = "nonneg_param";

const std::vector<std::pair<std::string, std::size_t>>& vocabulary() {
  static const std::vector<std::pair<std::string, std::size_t>> v = {
      {kLess, 2}, {kLessEq, 2}, {kEqual, 2}, {kDiffer, 2}, {kMember, 2},
      {kHolds, 1}, {kBinary, 1}, {kNonneg, 1}};
  return v;
}

bool in_vocabulary(const std::string& rel) {
  for (const auto& [n, a] : vocabulary()) {
    if (n == rel) return true;
  }
  return false;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

bool nonneg_literal(Expr e) {
  if (e.is(ExprKind::IntLit)) return e.int_value() >= 0;
  if (e.is(ExprKind::FloatLit)) return e.float_value() >= 0;
  return false;
}

// Drops Let conditions by substituting their definitions.
struct Resolved {
  std::vector<Expr> conditions;
  Subst subst;
};

void bind_let(Expr lhs, Expr rhs, Subst& s) {
  if (lhs.is(ExprKind::BVar)) {
    s[lhs.var()] = rhs;
    return;
  }
  if (!lhs.is(ExprKind::Tuple)) throw ShapeError("let target is not a pattern: " + to_sexpr(lhs));
  auto parts = lhs.children();
  for (std::size_t k = 0; k < parts.size(); ++k) {
    Expr part = rhs.is(ExprKind::Tuple) && rhs.children().size() == parts.size()
                    ? rhs.child(k)
                    : prim(PrimOp::TupleIndex, {rhs, int_lit(static_cast<std::int64_t>(k))});
    bind_let(parts[k], part, s);
  }
}

Resolved resolve_lets(const std::vector<Expr>& conds) {
  Resolved r;
  for (auto c : conds) {
    if (!c.is(ExprKind::Let)) continue;
    Subst one;
    bind_let(c.child(0), substitute(c.child(1), r.subst), one);
    for (auto& [v, e] : r.subst) e = substitute(e, one);
    for (auto& [v, e] : one) r.subst[v] = e;
  }
  for (auto c : conds) {
    if (!c.is(ExprKind::Let)) r.conditions.push_back(substitute(c, r.subst));
  }
  return r;
}

void collect_vars(Expr e, std::vector<Var>& out, std::set<Var>& seen) {
  if (e.is(ExprKind::BVar)) {
    if (seen.insert(e.var()).second) out.push_back(e.var());
    return;
  }
  for (auto k : e.children()) collect_vars(k, out, seen);
}

std::vector<Var> ordered_vars(std::span<const Expr> es) {
  std::vector<Var> out;
  std::set<Var> seen;
  for (auto e : es) collect_vars(e, out, seen);
  return out;
}

}  // namespace

const std::string& default_detection_rules() {
  static const std::string s = generated::kSos1Rules;
  return s;
}

std::vector<Expr> split_member_premise(Expr target, Expr domain) {
  return resolve_lets(ensugar_membership(target, domain)).conditions;
}

Detector::Detector(const DetectOptions& o) : opts_(o) {
  for (const auto& [n, a] : vocabulary()) g_.declare_relation(n, a);
  program_ = parse_rules(o.rules.empty() ? default_detection_rules() : o.rules);
  g_.add_program(program_);
}

void Detector::condition_facts(Expr cond, std::vector<Fact>& out) const {
  if (cond.is(ExprKind::Mem)) {
    Expr p = cond.child(0);
    Expr s = cond.child(1);
    if (p.is(ExprKind::BVar) && s.is(ExprKind::Range)) {
      out.push_back({kLess, {p, s.child(0)}});
    } else if (p.is(ExprKind::BVar) && is_natural_source(s, set_symbols_)) {
      out.push_back({kLess, {p, s}});
    } else {
      out.push_back({kMember, {p, s}});
    }
  } else if (cond.is(ExprKind::If)) {
    guard_facts(cond.child(0), out);
  } else {
    throw ShapeError("unsupported condition " + to_sexpr(cond));
  }
}

void Detector::guard_facts(Expr g, std::vector<Fact>& out) const {
  if (g.is(ExprKind::Prim)) {
    auto a = g.children();
    switch (g.op()) {
      case PrimOp::And:
        guard_facts(a[0], out);
        guard_facts(a[1], out);
        return;
      case PrimOp::Lt: out.push_back({kLess, {a[0], a[1]}}); return;
      case PrimOp::Le: out.push_back({kLessEq, {a[0], a[1]}}); return;
      case PrimOp::Eq: out.push_back({kEqual, {a[0], a[1]}}); return;
      case PrimOp::Neq: out.push_back({kDiffer, {a[0], a[1]}}); return;
      default: break;
    }
  }
  out.push_back({kHolds, {g}});
}

Expr Detector::lower_sums(Expr e, const std::string& source, std::vector<Fact>& facts) {
  if (e.is(ExprKind::Sum) && !e.child(0).is(ExprKind::Compr)) {
    auto c = ensugar_expr(e.child(0));
    auto r = resolve_lets(c.conditions);
    Expr head = lower_sums(substitute(c.head, r.subst), source, facts);
    for (auto cond : r.conditions) condition_facts(cond, facts);
    for (const auto& v : introduced_vars(r.conditions)) {
      bindings_.push_back({v, source, r.conditions});
    }
    return sum(compr(head, r.conditions));
  }
  if (e.children().empty()) return e;
  std::vector<Expr> kids;
  bool changed = false;
  for (auto k : e.children()) {
    kids.push_back(lower_sums(k, source, facts));
    changed = changed || !(kids.back() == k);
  }
  return changed ? with_children(e, std::move(kids)) : e;
}

void Detector::assert_facts(const std::vector<Fact>& facts) {
  for (const auto& f : facts) {
    std::vector<ClassId> args;
    for (auto a : f.args) args.push_back(g_.add_term(a));
    g_.assert_fact(f.rel, std::move(args));
  }
}

namespace {

void body_fact(Expr lhs, Cmp cmp, Expr rhs, std::vector<std::pair<std::string, std::vector<Expr>>>& out) {
  switch (cmp) {
    case Cmp::Le: out.push_back({kLessEq, {lhs, rhs}}); break;
    case Cmp::Ge: out.push_back({kLessEq, {rhs, lhs}}); break;
    case Cmp::Eq: out.push_back({kEqual, {lhs, rhs}}); break;
  }
}

}  // namespace

void Detector::encode_constraint(const Constraint& c) {
  std::vector<Fact> facts;
  if (!c.parametrized()) {
    Expr lhs = lower_sums(c.lhs, c.name, facts);
    Expr rhs = lower_sums(c.rhs, c.name, facts);
    std::vector<std::pair<std::string, std::vector<Expr>>> body;
    body_fact(lhs, c.cmp, rhs, body);
    for (auto& [rel, args] : body) facts.push_back({rel, args});
    assert_facts(facts);
    return;
  }

  Expr target = pattern_expr(c.index_patterns.front());
  Expr whole = mem(target, c.domain);
  premises_.before += term_size(whole);
  std::vector<Expr> conds;
  Subst s;
  if (opts_.split) {
    auto r = resolve_lets(ensugar_membership(target, c.domain));
    conds = std::move(r.conditions);
    s = std::move(r.subst);
    for (auto k : conds) premises_.after += term_size(k);
  } else {
    conds = {whole};
    premises_.after += term_size(whole);
  }

  std::vector<Fact> premise_facts;
  for (auto k : conds) condition_facts(k, premise_facts);

  std::vector<Fact> action_facts;
  Expr lhs = lower_sums(substitute(c.lhs, s), c.name, action_facts);
  Expr rhs = lower_sums(substitute(c.rhs, s), c.name, action_facts);
  std::vector<std::pair<std::string, std::vector<Expr>>> body;
  body_fact(lhs, c.cmp, rhs, body);
  for (auto& [rel, args] : body) action_facts.push_back({rel, args});

  std::map<Var, std::string> names;
  for (const auto& v : ordered_vars(conds)) {
    names[v] = "?" + v.name + "_" + std::to_string(v.nonce);
  }
  std::set<Var> inner;
  for (const auto& b : bindings_) inner.insert(b.var);
  for (const auto& f : action_facts) {
    for (auto a : f.args) {
      for (const auto& v : vars_of(a)) {
        if (!names.count(v) && !inner.count(v)) {
          throw ShapeError("index " + v.name + " of '" + c.name + "' is not bound by its domain");
        }
      }
    }
  }

  Rule r;
  r.name = "constraint:" + c.name;
  r.ruleset = "constraints";
  for (const auto& f : premise_facts) {
    Premise p;
    p.head = f.rel;
    for (auto a : f.args) p.args.push_back(term_pattern(a, names));
    r.premises.push_back(std::move(p));
  }
  for (const auto& f : action_facts) {
    Action a;
    a.relation = f.rel;
    for (auto x : f.args) a.args.push_back(term_pattern(x, names));
    r.actions.push_back(std::move(a));
  }
  g_.add_rule(std::move(r));

  // Representatives of the domain itself.
  Subst copy;
  for (const auto& [v, n] : names) copy[v] = bvar(refresh(v));
  std::vector<Expr> ground;
  for (auto k : conds) ground.push_back(substitute(k, copy));
  for (const auto& [v, e] : copy) bindings_.push_back({e.var(), c.name, ground});
  std::vector<Fact> henkin;
  for (auto k : ground) condition_facts(k, henkin);
  assert_facts(henkin);
}

void Detector::encode_model(const Model& m) {
  set_symbols_ = m.set_symbols();
  for (const auto& d : m.declarations) {
    bool nonneg = d.bounds && nonneg_literal(d.bounds->first);
    if (d.kind == DeclKind::BinaryVar) {
      g_.assert_fact(kBinary, {g_.add_term(fvar(d.symbol))});
    }
    if (d.kind == DeclKind::Placeholder && nonneg) {
      g_.assert_fact(kNonneg, {g_.add_term(fvar(d.symbol))});
    }
    if ((d.kind == DeclKind::BinaryVar || d.kind == DeclKind::ContinuousVar) &&
        (nonneg || d.kind == DeclKind::BinaryVar)) {
      Rule r;
      r.name = "lower-bound:" + d.symbol;
      r.ruleset = "detect";
      Premise p;
      p.kind = Premise::Kind::Eq;
      p.args = {Pat::variable("t"), Pat::node("Index", {Pat::node("FVar", {Pat::string(d.symbol)}),
                                                        Pat::variable("idx")})};
      r.premises.push_back(std::move(p));
      Action a;
      a.relation = kLessEq;
      a.args = {Pat::node("Int", {Pat::integer(0)}), Pat::variable("t")};
      r.actions.push_back(std::move(a));
      g_.add_rule(std::move(r));
    }
  }
  for (const auto& c : m.constraints) {
    try {
      encode_constraint(c);
    } catch (const Error& e) {
      warnings_.push_back("constraint '" + c.name + "' skipped: " + e.what());
    }
  }
}

RunReport Detector::saturate() {
  std::set<std::string> sets{"", "constraints", "detect"};
  for (const auto& r : program_.rules) sets.insert(r.ruleset);
  RunLimits lim{opts_.iteration_limit, opts_.deadline};
  auto rep = g_.run_rulesets({sets.begin(), sets.end()}, lim);
  if (!rep.saturated) {
    warnings_.push_back(rep.timed_out ? "deadline reached before saturation"
                                      : "iteration limit reached before saturation");
  }
  return rep;
}

std::vector<Detection> Detector::detections() const {
  std::map<Var, const HenkinBinding*> by_var;
  for (const auto& b : bindings_) by_var[b.var] = &b;

  std::vector<std::pair<std::string, Detection>> found;
  for (const auto& [rel, arity] : program_.relations) {
    if (arity != 2 || in_vocabulary(rel)) continue;
    for (const auto& f : g_.facts(rel)) {
      ExtractedTerm wrapped{"MkComprehension", {}, {g_.extract(f[1]), g_.extract(f[0])}, 0};
      Expr c = decode_term(wrapped);
      Detection d;
      d.kind = rel;
      d.variable = c.child(0);
      d.conditions.assign(c.children().begin() + 1, c.children().end());

      auto bound = introduced_vars(d.conditions);
      std::set<Var> covered(bound.begin(), bound.end());
      std::vector<Var> todo = ordered_vars(std::span<const Expr>(&d.variable, 1));
      for (std::size_t i = 0; i < todo.size(); ++i) {
        Var v = todo[i];
        if (!covered.insert(v).second) continue;
        auto it = by_var.find(v);
        if (it == by_var.end()) continue;
        for (auto cond : it->second->conditions) {
          if (std::find(d.context.begin(), d.context.end(), cond) == d.context.end()) {
            d.context.push_back(cond);
            for (const auto& w : ordered_vars(std::span<const Expr>(&cond, 1))) todo.push_back(w);
          }
        }
      }
      found.emplace_back(canonical_key(d), std::move(d));
    }
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Detection> out;
  for (auto& [k, d] : found) out.push_back(std::move(d));
  return out;
}

DetectionReport run_detection(const Model& m, const DetectOptions& o) {
  DetectionReport rep;
  auto t0 = std::chrono::steady_clock::now();
  Detector det(o);
  det.encode_model(m);
  rep.encode_ms = ms_since(t0);
  auto t1 = std::chrono::steady_clock::now();
  auto run = det.saturate();
  rep.saturate_ms = ms_since(t1);
  rep.saturated = run.saturated;
  rep.timed_out = run.timed_out;
  rep.detections = det.detections();
  rep.premises = det.premises();
  rep.warnings = det.warnings();
  return rep;
}

std::string condition_sexpr(Expr cond, const std::set<std::string>& set_symbols) {
  if (cond.is(ExprKind::Mem)) {
    Expr p = cond.child(0);
    Expr s = cond.child(1);
    if (p.is(ExprKind::BVar) && s.is(ExprKind::Range)) {
      return "(< " + to_sexpr(p) + " " + to_sexpr(s.child(0)) + ")";
    }
    if (p.is(ExprKind::BVar) && is_natural_source(s, set_symbols)) {
      return "(< " + to_sexpr(p) + " " + to_sexpr(s) + ")";
    }
    return "(member " + to_sexpr(p) + " " + to_sexpr(s) + ")";
  }
  if (cond.is(ExprKind::If)) return to_sexpr(cond.child(0));
  return to_sexpr(cond);
}

std::string canonical_key(const Detection& d) {
  std::vector<Expr> all = d.conditions;
  all.push_back(d.variable);
  Subst s;
  std::uint64_t k = 0;
  for (const auto& v : ordered_vars(all)) s[v] = bvar(Var{v.name, 0, k++});
  std::ostringstream os;
  os << d.kind;
  for (auto c : d.conditions) os << " " << to_sexpr(substitute(c, s));
  os << " => " << to_sexpr(substitute(d.variable, s));
  return os.str();
}

std::string ConcreteVar::to_string() const {
  std::ostringstream os;
  os << family << "[";
  for (std::size_t i = 0; i < index.size(); ++i) os << (i ? "," : "") << index[i].to_string();
  os << "]";
  return os.str();
}

std::vector<std::vector<ConcreteVar>> interpret_detection(const Detection& d, const Env& data) {
  if (!d.variable.is(ExprKind::Index) || !d.variable.child(0).is(ExprKind::FVar)) {
    throw EvalError("detected variable is not an indexed family: " + to_sexpr(d.variable));
  }
  std::vector<std::vector<ConcreteVar>> groups;
  for_each_solution(d.context, data, {}, [&](const BoundEnv& outer) {
    std::vector<ConcreteVar> group;
    for_each_solution(d.conditions, data, outer, [&](const BoundEnv& b) {
      ConcreteVar cv{d.variable.child(0).symbol(), {}};
      for (auto ix : d.variable.children().subspan(1)) cv.index.push_back(evaluate(ix, data, b));
      if (std::find(group.begin(), group.end(), cv) == group.end()) group.push_back(std::move(cv));
    });
    if (!group.empty()) groups.push_back(std::move(group));
  });
  return groups;
}

}  // namespace mt
