#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "modelterm/engine.hpp"

namespace mt {

namespace {

std::string leaf_text(const Leaf& l) {
  if (auto* i = std::get_if<std::int64_t>(&l)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&l)) {
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  if (auto* s = std::get_if<std::string>(&l)) return "\"" + *s + "\"";
  return "";
}

// Expr -> ENode tree, parameterised over how child nodes are resolved so
// add and lookup share one encoding.
template <class Emit>
class Encoder {
 public:
  explicit Encoder(Emit emit) : emit_(std::move(emit)) {}

  std::optional<ClassId> term(Expr e) {
    switch (e.kind()) {
      case ExprKind::FVar:
        return node("FVar", {str(e.symbol())});
      case ExprKind::BVar:
        return node("BVar", {var(e.var())});
      case ExprKind::IntLit:
        return node("Int", {i64(e.int_value())});
      case ExprKind::FloatLit:
        return node("Float", {emit_(ENode{"f64", e.float_value(), {}})});
      case ExprKind::BoolLit:
        return node("Bool", {i64(e.bool_value() ? 1 : 0)});
      case ExprKind::Tuple:
        return node("Tuple", {list(e.children(), "Cons", "Nil")});
      case ExprKind::Prim:
        return node(std::string(op_name(e.op())), kids(e.children()));
      case ExprKind::Sum:
        return node("Sum", kids(e.children()));
      case ExprKind::Map:
        return node("Map", kids(e.children()));
      case ExprKind::FlatMap:
        return node("FlatMap", kids(e.children()));
      case ExprKind::Filter:
        return node("Filter", kids(e.children()));
      case ExprKind::Range:
        return node("Range", kids(e.children()));
      case ExprKind::Index:
        return node("Index", {term(e.child(0)), list(e.children().subspan(1), "Cons", "Nil")});
      case ExprKind::Lam:
        return node("Lam", {pattern(e.pattern()), term(e.child(0))});
      case ExprKind::App:
        return node("App", {term(e.child(0)), list(e.children().subspan(1), "Cons", "Nil")});
      case ExprKind::Mem:
        return node("Mem", kids(e.children()));
      case ExprKind::If:
        return node("If", kids(e.children()));
      case ExprKind::Let:
        return node("Let", kids(e.children()));
      case ExprKind::Compr:
        return node("MkComprehension",
                    {term(e.child(0)), list(e.children().subspan(1), "CCons", "CNil")});
    }
    return std::nullopt;
  }

 private:
  using Opt = std::optional<ClassId>;

  Opt node(std::string op, std::vector<Opt> ks) {
    ENode n{std::move(op), {}, {}};
    for (auto& k : ks) {
      if (!k) return std::nullopt;
      n.kids.push_back(*k);
    }
    return emit_(std::move(n));
  }
  Opt str(const std::string& s) { return emit_(ENode{"String", s, {}}); }
  Opt i64(std::int64_t v) { return emit_(ENode{"i64", v, {}}); }
  Opt var(const Var& v) {
    return node("MkVar", {str(v.name), i64(v.offset), i64(static_cast<std::int64_t>(v.nonce))});
  }
  std::vector<Opt> kids(std::span<const Expr> cs) {
    std::vector<Opt> out;
    for (const auto& c : cs) out.push_back(term(c));
    return out;
  }
  Opt list(std::span<const Expr> items, const char* cons, const char* nil) {
    Opt tail = node(nil, {});
    for (auto it = items.rbegin(); it != items.rend(); ++it) tail = node(cons, {term(*it), tail});
    return tail;
  }
  Opt pattern(const Pattern& p) {
    if (!p.is_tuple()) return node("PVar", {var(p.var())});
    Opt tail = node("PNil", {});
    for (auto it = p.parts().rbegin(); it != p.parts().rend(); ++it) {
      tail = node("PCons", {pattern(*it), tail});
    }
    return node("PTuple", {tail});
  }

  Emit emit_;
};

template <class Emit>
Encoder<Emit> encoder(Emit e) {
  return Encoder<Emit>(std::move(e));
}

}  // namespace

ClassId EGraph::add_term(Expr e) {
  auto enc = encoder([this](ENode n) -> std::optional<ClassId> { return add(std::move(n)); });
  return *enc.term(e);
}

std::optional<ClassId> EGraph::lookup_term(Expr e) const {
  auto enc = encoder([this](ENode n) { return lookup(std::move(n)); });
  return enc.term(e);
}

std::optional<NodeId> EGraph::lookup_term_node(Expr e) const {
  auto root = lookup_term(e);
  if (!root) return std::nullopt;
  // Re-encode the top node against the found children.
  std::optional<NodeId> found;
  auto enc = encoder([&](ENode n) -> std::optional<ClassId> {
    auto id = lookup_node(n);
    if (!id) return std::nullopt;
    found = id;
    return class_of(*id);
  });
  enc.term(e);
  return found;
}

// ---------------------------------------------------------------------------
// Extraction

ExtractedTerm EGraph::extract(ClassId root, const CostModel& cm) const {
  root = find(root);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(parent_.size(), inf);
  std::vector<NodeId> choice(parent_.size(), std::numeric_limits<NodeId>::max());
  std::vector<double> own(nodes_.size(), 0.0);
  std::vector<NodeId> live;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    if (alive_[n] && !is_subsumed(n)) {
      live.push_back(n);
      own[n] = cm.node_cost(*this, n);
    }
  }
  for (std::size_t pass = 0; pass <= live.size() + 1; ++pass) {
    bool changed = false;
    for (NodeId n : live) {
      double total = own[n];
      for (ClassId k : nodes_[n].kids) total += best[find(k)];
      if (!std::isfinite(total)) continue;
      ClassId c = class_of(n);
      if (total < best[c] || (total == best[c] && n < choice[c])) {
        if (total != best[c] || n != choice[c]) changed = true;
        best[c] = total;
        choice[c] = n;
      }
    }
    if (!changed) break;
  }
  if (!std::isfinite(best[root])) {
    throw EngineError("no finite-cost term in e-class " + std::to_string(root));
  }
  std::vector<bool> on_path(parent_.size(), false);
  std::function<ExtractedTerm(ClassId)> build = [&](ClassId c) {
    c = find(c);
    if (on_path[c]) throw EngineError("cyclic extraction at e-class " + std::to_string(c));
    on_path[c] = true;
    const ENode& n = nodes_[choice[c]];
    ExtractedTerm t{n.op, n.leaf, {}, best[c]};
    for (ClassId k : n.kids) t.kids.push_back(build(k));
    on_path[c] = false;
    return t;
  };
  return build(root);
}

Expr EGraph::extract_expr(ClassId root, const CostModel& cm) const {
  return decode_term(extract(root, cm));
}

// ---------------------------------------------------------------------------

std::string EGraph::dump() const {
  std::map<ClassId, std::vector<NodeId>> classes;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    if (alive_[n]) classes[class_of(n)].push_back(n);
  }
  std::ostringstream os;
  for (const auto& [c, ns] : classes) {
    os << "c" << c << ":";
    for (NodeId n : ns) {
      const ENode& node = nodes_[n];
      os << " " << (is_subsumed(n) ? "!" : "") << node.op;
      if (node.leaf.index() != 0) os << "[" << leaf_text(node.leaf) << "]";
      if (!node.kids.empty()) {
        os << "(";
        for (std::size_t i = 0; i < node.kids.size(); ++i) {
          os << (i ? " " : "") << "c" << find(node.kids[i]);
        }
        os << ")";
      }
      if (auto ct = cost_override(n)) os << "{cost=" << *ct << "}";
    }
    os << "\n";
  }
  for (const auto& [name, rel] : relations_) {
    for (const auto& f : facts(name)) {
      os << "(" << name;
      for (ClassId c : f) os << " c" << c;
      os << ")\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Decoding

namespace {

[[noreturn]] void undecodable(const ExtractedTerm& t) {
  throw EngineError("cannot decode e-node " + t.op);
}

std::int64_t int_leaf(const ExtractedTerm& t) {
  if (auto* i = std::get_if<std::int64_t>(&t.leaf)) return *i;
  undecodable(t);
}

std::string str_leaf(const ExtractedTerm& t) {
  if (auto* s = std::get_if<std::string>(&t.leaf)) return *s;
  undecodable(t);
}

Var decode_var(const ExtractedTerm& t) {
  if (t.op != "MkVar" || t.kids.size() != 3) undecodable(t);
  return Var{str_leaf(t.kids[0]), static_cast<std::uint32_t>(int_leaf(t.kids[1])),
             static_cast<std::uint64_t>(int_leaf(t.kids[2]))};
}

std::vector<const ExtractedTerm*> decode_list(const ExtractedTerm& t, const char* cons,
                                              const char* nil) {
  std::vector<const ExtractedTerm*> out;
  const ExtractedTerm* cur = &t;
  while (cur->op == cons && cur->kids.size() == 2) {
    out.push_back(&cur->kids[0]);
    cur = &cur->kids[1];
  }
  if (cur->op != nil) undecodable(*cur);
  return out;
}

Pattern decode_pattern(const ExtractedTerm& t) {
  if (t.op == "PVar" && t.kids.size() == 1) return Pattern::var(decode_var(t.kids[0]));
  if (t.op == "PTuple" && t.kids.size() == 1) {
    std::vector<Pattern> parts;
    for (const auto* p : decode_list(t.kids[0], "PCons", "PNil")) parts.push_back(decode_pattern(*p));
    return Pattern::tuple(std::move(parts));
  }
  undecodable(t);
}

}  // namespace

Expr decode_term(const ExtractedTerm& t) {
  auto kid = [&](std::size_t i) { return decode_term(t.kids.at(i)); };
  auto items = [&](const ExtractedTerm& l, const char* cons, const char* nil) {
    std::vector<Expr> out;
    for (const auto* x : decode_list(l, cons, nil)) out.push_back(decode_term(*x));
    return out;
  };
  const auto& op = t.op;
  std::size_t n = t.kids.size();
  if (op == "FVar" && n == 1) return fvar(str_leaf(t.kids[0]));
  if (op == "BVar" && n == 1) return bvar(decode_var(t.kids[0]));
  if (op == "Int" && n == 1) return int_lit(int_leaf(t.kids[0]));
  if (op == "Float" && n == 1) {
    if (auto* d = std::get_if<double>(&t.kids[0].leaf)) return float_lit(*d);
    undecodable(t);
  }
  if (op == "Bool" && n == 1) return bool_lit(int_leaf(t.kids[0]) != 0);
  if (op == "Tuple" && n == 1) return tuple(items(t.kids[0], "Cons", "Nil"));
  if (op == "Sum" && n == 1) return sum(kid(0));
  if (op == "Map" && n == 2) return map(kid(0), kid(1));
  if (op == "FlatMap" && n == 2) return flat_map(kid(0), kid(1));
  if (op == "Filter" && n == 2) return filter(kid(0), kid(1));
  if (op == "Range" && n == 1) return range(kid(0));
  if (op == "Index" && n == 2) return index(kid(0), items(t.kids[1], "Cons", "Nil"));
  if (op == "Lam" && n == 2) return lam(decode_pattern(t.kids[0]), kid(1));
  if (op == "App" && n == 2) return app(kid(0), items(t.kids[1], "Cons", "Nil"));
  if (op == "Mem" && n == 2) return mem(kid(0), kid(1));
  if (op == "If" && n == 1) return guard(kid(0));
  if (op == "Let" && n == 2) return let(kid(0), kid(1));
  if (op == "MkComprehension" && n == 2) return compr(kid(0), items(t.kids[1], "CCons", "CNil"));
  if (auto p = op_from_name(op); p && static_cast<std::size_t>(arity(*p)) == n) {
    std::vector<Expr> args;
    for (std::size_t i = 0; i < n; ++i) args.push_back(kid(i));
    return prim(*p, std::move(args));
  }
  undecodable(t);
}

}  // namespace mt

namespace mt {

namespace {

Pat leaf_pat(const char* op, Leaf l) {
  Pat p = Pat::node(op);
  p.leaf = std::move(l);
  return p;
}

Pat var_pat(const Var& v) {
  return Pat::node("MkVar", {Pat::string(v.name), Pat::integer(v.offset),
                             Pat::integer(static_cast<std::int64_t>(v.nonce))});
}

Pat list_pat(std::vector<Pat> items, const char* cons, const char* nil) {
  Pat tail = Pat::node(nil);
  for (auto it = items.rbegin(); it != items.rend(); ++it) tail = Pat::node(cons, {*it, tail});
  return tail;
}

Pat pattern_pat(const Pattern& p) {
  if (!p.is_tuple()) return Pat::node("PVar", {var_pat(p.var())});
  std::vector<Pat> parts;
  for (const auto& q : p.parts()) parts.push_back(pattern_pat(q));
  return Pat::node("PTuple", {list_pat(std::move(parts), "PCons", "PNil")});
}

}  // namespace

Pat term_pattern(Expr e, const std::map<Var, std::string>& vars) {
  auto all = [&](std::span<const Expr> xs) {
    std::vector<Pat> out;
    for (auto x : xs) out.push_back(term_pattern(x, vars));
    return out;
  };
  switch (e.kind()) {
    case ExprKind::FVar:
      return Pat::node("FVar", {Pat::string(e.symbol())});
    case ExprKind::BVar:
      if (auto it = vars.find(e.var()); it != vars.end()) return Pat::variable(it->second);
      return Pat::node("BVar", {var_pat(e.var())});
    case ExprKind::IntLit:
      return Pat::node("Int", {Pat::integer(e.int_value())});
    case ExprKind::FloatLit:
      return Pat::node("Float", {leaf_pat("f64", e.float_value())});
    case ExprKind::BoolLit:
      return Pat::node("Bool", {Pat::integer(e.bool_value() ? 1 : 0)});
    case ExprKind::Tuple:
      return Pat::node("Tuple", {list_pat(all(e.children()), "Cons", "Nil")});
    case ExprKind::Prim:
      return Pat::node(std::string(op_name(e.op())), all(e.children()));
    case ExprKind::Sum:
      return Pat::node("Sum", all(e.children()));
    case ExprKind::Map:
      return Pat::node("Map", all(e.children()));
    case ExprKind::FlatMap:
      return Pat::node("FlatMap", all(e.children()));
    case ExprKind::Filter:
      return Pat::node("Filter", all(e.children()));
    case ExprKind::Range:
      return Pat::node("Range", all(e.children()));
    case ExprKind::Index:
      return Pat::node("Index", {term_pattern(e.child(0), vars),
                                 list_pat(all(e.children().subspan(1)), "Cons", "Nil")});
    case ExprKind::Lam:
      return Pat::node("Lam", {pattern_pat(e.pattern()), term_pattern(e.child(0), vars)});
    case ExprKind::App:
      return Pat::node("App", {term_pattern(e.child(0), vars),
                               list_pat(all(e.children().subspan(1)), "Cons", "Nil")});
    case ExprKind::Mem:
      return Pat::node("Mem", all(e.children()));
    case ExprKind::If:
      return Pat::node("If", all(e.children()));
    case ExprKind::Let:
      return Pat::node("Let", all(e.children()));
    case ExprKind::Compr:
      return Pat::node("MkComprehension", {term_pattern(e.child(0), vars),
                                           list_pat(all(e.children().subspan(1)), "CCons", "CNil")});
  }
  throw EngineError("cannot encode " + to_sexpr(e));
}

}  // namespace mt
