#include "modelterm/ast.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_set>

namespace mt {

namespace {

std::atomic<std::uint64_t> g_nonce{0};

void hash_combine(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

std::size_t hash_var(const Var& v) {
  std::size_t h = std::hash<std::string>{}(v.name);
  hash_combine(h, v.offset);
  hash_combine(h, v.nonce);
  return h;
}

}  // namespace

Var fresh_var(std::string name, std::uint32_t offset) {
  return Var{std::move(name), offset, g_nonce.fetch_add(1, std::memory_order_relaxed)};
}

Var refresh(const Var& v) { return fresh_var(v.name, 0); }

// ---------------------------------------------------------------------------
// Pattern

Pattern Pattern::var(Var v) {
  Pattern p;
  p.var_ = std::move(v);
  return p;
}

Pattern Pattern::tuple(std::vector<Pattern> parts) {
  if (parts.size() < 2) throw ShapeError("tuple pattern needs at least two components");
  Pattern p;
  p.parts_ = std::move(parts);
  return p;
}

std::vector<Var> Pattern::vars() const {
  std::vector<Var> out;
  std::function<void(const Pattern&)> walk = [&](const Pattern& p) {
    if (!p.is_tuple()) {
      out.push_back(p.var());
      return;
    }
    for (const auto& q : p.parts()) walk(q);
  };
  walk(*this);
  return out;
}

Pattern Pattern::refreshed() const {
  if (!is_tuple()) return Pattern::var(refresh(var()));
  std::vector<Pattern> ps;
  ps.reserve(parts_.size());
  for (const auto& q : parts_) ps.push_back(q.refreshed());
  return Pattern::tuple(std::move(ps));
}

std::size_t Pattern::hash() const {
  if (!is_tuple()) return hash_var(*var_);
  std::size_t h = 0x51ed27;
  for (const auto& q : parts_) hash_combine(h, q.hash());
  return h;
}

// ---------------------------------------------------------------------------
// PrimOp

int arity(PrimOp op) {
  switch (op) {
    case PrimOp::Not:
    case PrimOp::Count:
      return 1;
    default:
      return 2;
  }
}

std::string_view op_name(PrimOp op) {
  switch (op) {
    case PrimOp::Add: return "add";
    case PrimOp::Sub: return "sub";
    case PrimOp::Mul: return "mul";
    case PrimOp::Div: return "div";
    case PrimOp::Mod: return "mod";
    case PrimOp::Eq: return "eq";
    case PrimOp::Neq: return "neq";
    case PrimOp::Lt: return "lt";
    case PrimOp::Le: return "le";
    case PrimOp::And: return "and";
    case PrimOp::Or: return "or";
    case PrimOp::Not: return "not";
    case PrimOp::Count: return "count";
    case PrimOp::TupleIndex: return "tuple-index";
  }
  return "?";
}

std::optional<PrimOp> op_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(PrimOp::TupleIndex); ++i) {
    auto op = static_cast<PrimOp>(i);
    if (op_name(op) == name) return op;
  }
  return std::nullopt;
}

bool is_comparison(PrimOp op) {
  return op == PrimOp::Eq || op == PrimOp::Neq || op == PrimOp::Lt || op == PrimOp::Le;
}

std::string_view kind_name(ExprKind k) {
  switch (k) {
    case ExprKind::FVar: return "FVar";
    case ExprKind::BVar: return "BVar";
    case ExprKind::Lam: return "Lam";
    case ExprKind::App: return "App";
    case ExprKind::IntLit: return "Int";
    case ExprKind::FloatLit: return "Float";
    case ExprKind::BoolLit: return "Bool";
    case ExprKind::Tuple: return "Tuple";
    case ExprKind::Prim: return "Prim";
    case ExprKind::Sum: return "Sum";
    case ExprKind::Map: return "Map";
    case ExprKind::FlatMap: return "FlatMap";
    case ExprKind::Filter: return "Filter";
    case ExprKind::Index: return "Index";
    case ExprKind::Range: return "Range";
    case ExprKind::Mem: return "Mem";
    case ExprKind::If: return "If";
    case ExprKind::Let: return "Let";
    case ExprKind::Compr: return "Compr";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Hashconsing

struct ExprNode {
  ExprKind kind{};
  std::string sym;
  Var var;
  std::optional<Pattern> pat;
  std::int64_t ival = 0;
  double fval = 0.0;
  PrimOp op = PrimOp::Add;
  std::vector<Expr> kids;
  std::size_t hash = 0;
  std::uint64_t id = 0;

  std::size_t compute_hash() const {
    std::size_t h = static_cast<std::size_t>(kind);
    hash_combine(h, std::hash<std::string>{}(sym));
    hash_combine(h, hash_var(var));
    if (pat) hash_combine(h, pat->hash());
    hash_combine(h, std::hash<std::int64_t>{}(ival));
    hash_combine(h, std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(fval)));
    hash_combine(h, static_cast<std::size_t>(op));
    for (const auto& k : kids) hash_combine(h, k.id());
    return h;
  }

  bool same_content(const ExprNode& o) const {
    return kind == o.kind && sym == o.sym && var == o.var && pat == o.pat && ival == o.ival &&
           std::bit_cast<std::uint64_t>(fval) == std::bit_cast<std::uint64_t>(o.fval) &&
           op == o.op && kids == o.kids;
  }
};

namespace {

struct NodePtrHash {
  using is_transparent = void;
  std::size_t operator()(const std::unique_ptr<ExprNode>& n) const { return n->hash; }
  std::size_t operator()(const ExprNode* n) const { return n->hash; }
};

struct NodePtrEq {
  using is_transparent = void;
  template <class A, class B>
  bool operator()(const A& a, const B& b) const {
    return deref(a).same_content(deref(b));
  }
  static const ExprNode& deref(const std::unique_ptr<ExprNode>& p) { return *p; }
  static const ExprNode& deref(const ExprNode* p) { return *p; }
};

struct Interner {
  std::mutex mu;
  std::unordered_set<std::unique_ptr<ExprNode>, NodePtrHash, NodePtrEq> table;
  std::uint64_t next_id = 0;
};

Interner& interner() {
  static Interner* in = new Interner();  // intentionally leaked; terms live for the process
  return *in;
}

}  // namespace

Expr intern(ExprNode&& n) {
  n.hash = n.compute_hash();
  auto& in = interner();
  std::lock_guard lock(in.mu);
  const ExprNode* probe = &n;
  if (auto it = in.table.find(probe); it != in.table.end()) return Expr(it->get());
  auto owned = std::make_unique<ExprNode>(std::move(n));
  owned->id = in.next_id++;
  const ExprNode* raw = owned.get();
  in.table.insert(std::move(owned));
  return Expr(raw);
}

ExprKind Expr::kind() const { return node_->kind; }
std::uint64_t Expr::id() const { return node_->id; }
const std::string& Expr::symbol() const { return node_->sym; }
const Var& Expr::var() const { return node_->var; }
const Pattern& Expr::pattern() const { return *node_->pat; }
std::int64_t Expr::int_value() const { return node_->ival; }
double Expr::float_value() const { return node_->fval; }
bool Expr::bool_value() const { return node_->ival != 0; }
PrimOp Expr::op() const { return node_->op; }
std::span<const Expr> Expr::children() const { return node_->kids; }

namespace {

Expr make(ExprKind k, std::vector<Expr> kids = {}) {
  ExprNode n;
  n.kind = k;
  n.kids = std::move(kids);
  return intern(std::move(n));
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(what);
}

}  // namespace

Expr fvar(std::string name) {
  ExprNode n;
  n.kind = ExprKind::FVar;
  n.sym = std::move(name);
  return intern(std::move(n));
}

Expr bvar(Var v) {
  ExprNode n;
  n.kind = ExprKind::BVar;
  n.var = std::move(v);
  return intern(std::move(n));
}

Expr lam(Pattern p, Expr body) {
  require(static_cast<bool>(body), "lambda body is null");
  ExprNode n;
  n.kind = ExprKind::Lam;
  n.pat = std::move(p);
  n.kids = {body};
  return intern(std::move(n));
}

Expr app(Expr fn, std::vector<Expr> args) {
  args.insert(args.begin(), fn);
  return make(ExprKind::App, std::move(args));
}

Expr int_lit(std::int64_t v) {
  ExprNode n;
  n.kind = ExprKind::IntLit;
  n.ival = v;
  return intern(std::move(n));
}

Expr float_lit(double v) {
  ExprNode n;
  n.kind = ExprKind::FloatLit;
  n.fval = v;
  return intern(std::move(n));
}

Expr bool_lit(bool v) {
  ExprNode n;
  n.kind = ExprKind::BoolLit;
  n.ival = v ? 1 : 0;
  return intern(std::move(n));
}

Expr tuple(std::vector<Expr> items) { return make(ExprKind::Tuple, std::move(items)); }

Expr prim(PrimOp op, std::vector<Expr> args) {
  if (static_cast<int>(args.size()) != arity(op))
    throw Error("wrong number of operands for " + std::string(op_name(op)));
  ExprNode n;
  n.kind = ExprKind::Prim;
  n.op = op;
  n.kids = std::move(args);
  return intern(std::move(n));
}

Expr sum(Expr stream) { return make(ExprKind::Sum, {stream}); }

Expr map(Expr fn, Expr stream) {
  require(fn.is(ExprKind::Lam), "map expects a lambda");
  return make(ExprKind::Map, {fn, stream});
}

Expr flat_map(Expr fn, Expr stream) {
  require(fn.is(ExprKind::Lam), "flat_map expects a lambda");
  return make(ExprKind::FlatMap, {fn, stream});
}

Expr filter(Expr pred, Expr stream) {
  require(pred.is(ExprKind::Lam), "filter expects a lambda");
  return make(ExprKind::Filter, {pred, stream});
}

Expr index(Expr base, std::vector<Expr> indices) {
  indices.insert(indices.begin(), base);
  return make(ExprKind::Index, std::move(indices));
}

Expr range(Expr source) { return make(ExprKind::Range, {source}); }
Expr mem(Expr bound, Expr source) { return make(ExprKind::Mem, {bound, source}); }
Expr guard(Expr cond) { return make(ExprKind::If, {cond}); }
Expr let(Expr lhs, Expr rhs) { return make(ExprKind::Let, {lhs, rhs}); }

Expr compr(Expr head, std::vector<Expr> conditions) {
  for (auto c : conditions)
    require(c.is(ExprKind::Mem) || c.is(ExprKind::If) || c.is(ExprKind::Let),
            "comprehension conditions must be Mem, If or Let");
  conditions.insert(conditions.begin(), head);
  return make(ExprKind::Compr, std::move(conditions));
}

// ---------------------------------------------------------------------------
// Patterns as expressions

Expr pattern_expr(const Pattern& p) {
  if (!p.is_tuple()) return bvar(p.var());
  std::vector<Expr> items;
  for (const auto& q : p.parts()) items.push_back(pattern_expr(q));
  return tuple(std::move(items));
}

std::optional<Pattern> as_pattern(Expr e) {
  if (e.is(ExprKind::BVar)) return Pattern::var(e.var());
  if (!e.is(ExprKind::Tuple) || e.children().size() < 2) return std::nullopt;
  std::vector<Pattern> parts;
  for (auto c : e.children()) {
    auto p = as_pattern(c);
    if (!p) return std::nullopt;
    parts.push_back(std::move(*p));
  }
  return Pattern::tuple(std::move(parts));
}

// ---------------------------------------------------------------------------
// Substitution

namespace {

Pattern subst_pattern(const Pattern& p, const Subst& s) {
  if (!p.is_tuple()) {
    auto it = s.find(p.var());
    if (it == s.end()) return p;
    if (auto q = as_pattern(it->second)) return *q;
    return p;
  }
  std::vector<Pattern> parts;
  for (const auto& q : p.parts()) parts.push_back(subst_pattern(q, s));
  return Pattern::tuple(std::move(parts));
}

}  // namespace

Expr with_children(Expr e, std::vector<Expr> kids) {
  switch (e.kind()) {
    case ExprKind::App: {
      Expr fn = kids.front();
      kids.erase(kids.begin());
      return app(fn, std::move(kids));
    }
    case ExprKind::Tuple: return tuple(std::move(kids));
    case ExprKind::Prim: return prim(e.op(), std::move(kids));
    case ExprKind::Sum: return sum(kids[0]);
    case ExprKind::Map: return map(kids[0], kids[1]);
    case ExprKind::FlatMap: return flat_map(kids[0], kids[1]);
    case ExprKind::Filter: return filter(kids[0], kids[1]);
    case ExprKind::Index: {
      Expr base = kids.front();
      kids.erase(kids.begin());
      return index(base, std::move(kids));
    }
    case ExprKind::Range: return range(kids[0]);
    case ExprKind::Mem: return mem(kids[0], kids[1]);
    case ExprKind::If: return guard(kids[0]);
    case ExprKind::Let: return let(kids[0], kids[1]);
    case ExprKind::Compr: {
      Expr head = kids.front();
      kids.erase(kids.begin());
      return compr(head, std::move(kids));
    }
    case ExprKind::Lam: return lam(e.pattern(), kids[0]);
    default: return e;
  }
}

Expr substitute(Expr e, const Subst& s) {
  if (s.empty()) return e;
  switch (e.kind()) {
    case ExprKind::BVar: {
      auto it = s.find(e.var());
      return it == s.end() ? e : it->second;
    }
    case ExprKind::FVar:
    case ExprKind::IntLit:
    case ExprKind::FloatLit:
    case ExprKind::BoolLit:
      return e;
    case ExprKind::Lam:
      return lam(subst_pattern(e.pattern(), s), substitute(e.child(0), s));
    default: {
      std::vector<Expr> kids;
      kids.reserve(e.children().size());
      bool changed = false;
      for (auto c : e.children()) {
        kids.push_back(substitute(c, s));
        changed = changed || !(kids.back() == c);
      }
      return changed ? with_children(e, std::move(kids)) : e;
    }
  }
}

namespace {

void bind_shape(const Pattern& p, Expr rep, Subst& s) {
  if (!p.is_tuple()) {
    s[p.var()] = rep;
    return;
  }
  if (!rep.is(ExprKind::Tuple) || rep.children().size() != p.parts().size())
    throw ShapeError("replacement does not match tuple pattern of arity " +
                     std::to_string(p.parts().size()));
  for (std::size_t i = 0; i < p.parts().size(); ++i) bind_shape(p.parts()[i], rep.child(i), s);
}

}  // namespace

Expr open(Expr body, const Pattern& p, std::span<const Expr> replacements) {
  Subst s;
  if (!p.is_tuple()) {
    if (replacements.size() != 1) throw ShapeError("single-variable pattern needs one replacement");
    s[p.var()] = replacements[0];
  } else {
    if (replacements.size() != p.parts().size())
      throw ShapeError("expected " + std::to_string(p.parts().size()) + " replacements, got " +
                       std::to_string(replacements.size()));
    for (std::size_t i = 0; i < replacements.size(); ++i) bind_shape(p.parts()[i], replacements[i], s);
  }
  return substitute(body, s);
}

Expr open(Expr body, const Pattern& p, Expr replacement) {
  if (!p.is_tuple()) return open(body, p, std::span<const Expr>(&replacement, 1));
  if (!replacement.is(ExprKind::Tuple)) throw ShapeError("tuple pattern needs a tuple replacement");
  return open(body, p, replacement.children());
}

// ---------------------------------------------------------------------------
// Queries

std::set<std::string> free_vars(Expr e) {
  std::set<std::string> out;
  std::function<void(Expr)> walk = [&](Expr x) {
    if (x.is(ExprKind::FVar)) out.insert(x.symbol());
    for (auto c : x.children()) walk(c);
  };
  walk(e);
  return out;
}

std::set<Var> vars_of(Expr e) {
  std::set<Var> out;
  std::function<void(Expr)> walk = [&](Expr x) {
    if (x.is(ExprKind::BVar)) out.insert(x.var());
    if (x.is(ExprKind::Lam))
      for (auto& v : x.pattern().vars()) out.insert(v);
    for (auto c : x.children()) walk(c);
  };
  walk(e);
  return out;
}

bool is_natural_source(Expr e, const std::set<std::string>& set_symbols) {
  switch (e.kind()) {
    case ExprKind::IntLit:
    case ExprKind::Range:
      return true;
    case ExprKind::FVar:
      return !set_symbols.contains(e.symbol());
    case ExprKind::Prim:
      switch (e.op()) {
        case PrimOp::Add:
        case PrimOp::Sub:
        case PrimOp::Mul:
        case PrimOp::Div:
        case PrimOp::Mod:
        case PrimOp::Count:
          return true;
        default:
          return false;
      }
    default:
      return false;
  }
}

std::size_t term_size(Expr e) {
  std::size_t n = 1;
  for (auto c : e.children()) n += term_size(c);
  return n;
}

namespace {

std::string_view sexpr_op(PrimOp op) {
  switch (op) {
    case PrimOp::Add: return "+";
    case PrimOp::Sub: return "-";
    case PrimOp::Mul: return "*";
    case PrimOp::Div: return "/";
    case PrimOp::Mod: return "%";
    case PrimOp::Eq: return "=";
    case PrimOp::Neq: return "!=";
    case PrimOp::Lt: return "<";
    case PrimOp::Le: return "<=";
    default: return op_name(op);
  }
}

void print_pattern(std::ostream& os, const Pattern& p) {
  if (!p.is_tuple()) {
    os << p.var().name << '_' << p.var().nonce;
    return;
  }
  os << '(';
  for (std::size_t i = 0; i < p.parts().size(); ++i) {
    if (i) os << ' ';
    print_pattern(os, p.parts()[i]);
  }
  os << ')';
}

void print(std::ostream& os, Expr e) {
  auto list = [&](std::string_view head, std::span<const Expr> kids) {
    os << '(' << head;
    for (auto c : kids) {
      os << ' ';
      print(os, c);
    }
    os << ')';
  };
  switch (e.kind()) {
    case ExprKind::FVar: os << e.symbol(); return;
    case ExprKind::BVar: os << e.var().name << '_' << e.var().nonce; return;
    case ExprKind::IntLit: os << e.int_value(); return;
    case ExprKind::FloatLit: os << e.float_value(); return;
    case ExprKind::BoolLit: os << (e.bool_value() ? "true" : "false"); return;
    case ExprKind::Lam:
      os << "(lambda ";
      print_pattern(os, e.pattern());
      os << ' ';
      print(os, e.child(0));
      os << ')';
      return;
    case ExprKind::Prim: list(sexpr_op(e.op()), e.children()); return;
    case ExprKind::Index: {
      print(os, e.child(0));
      os << '[';
      auto idx = e.children().subspan(1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) os << ',';
        print(os, idx[i]);
      }
      os << ']';
      return;
    }
    case ExprKind::Tuple: list("tuple", e.children()); return;
    case ExprKind::App: list("app", e.children()); return;
    case ExprKind::Sum: list("sum", e.children()); return;
    case ExprKind::Map: list("map", e.children()); return;
    case ExprKind::FlatMap: list("flat_map", e.children()); return;
    case ExprKind::Filter: list("filter", e.children()); return;
    case ExprKind::Range: list("range", e.children()); return;
    case ExprKind::Mem: list("member", e.children()); return;
    case ExprKind::If: list("if", e.children()); return;
    case ExprKind::Let: list("let", e.children()); return;
    case ExprKind::Compr: list("compr", e.children()); return;
  }
}

}  // namespace

std::string to_sexpr(Expr e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

}  // namespace mt
