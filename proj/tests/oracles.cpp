#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace oracle {

using mt::PrimOp;
using mt::SExpr;

mt::Env Data::env() const {
  std::vector<mt::Value> s, p, ws;
  for (auto v : S) s.push_back(mt::Value::integer(v));
  for (auto [a, b] : P) p.push_back(mt::Value::tuple({mt::Value::integer(a), mt::Value::integer(b)}));
  for (auto v : w) ws.push_back(mt::Value::integer(v));
  return {{"N", mt::Value::integer(N)},
          {"M", mt::Value::integer(M)},
          {"S", mt::Value::set(s)},
          {"P", mt::Value::set(p)},
          {"w", mt::Value::seq(ws)}};
}

Data random_data(std::mt19937& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Data d;
  d.N = pick(0, 4);
  d.M = pick(0, 4);
  for (int v = 0; v <= 6; ++v) {
    if (pick(0, 1)) d.S.push_back(v);
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      if (pick(0, 2) == 0) d.P.emplace_back(a, b);
    }
  }
  for (int i = 0; i < 16; ++i) d.w.push_back(pick(-5, 9));
  return d;
}

namespace {

struct Scope {
  std::vector<std::pair<std::string, Item>> vars;

  const Item* find(const std::string& n) const {
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
      if (it->first == n) return &it->second;
    }
    return nullptr;
  }
};

std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  if (b == 0) throw std::runtime_error("mod by zero");
  std::int64_t r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? r + b : r;
}

class Interp {
 public:
  explicit Interp(const Data& d) : d_(d) {}

  Item value(const SExpr& e, Scope& sc) {
    switch (e.kind) {
      case SExpr::Kind::Int: return {e.ival};
      case SExpr::Kind::Bool: return {e.ival != 0 ? 1 : 0};
      case SExpr::Kind::Ident: {
        if (const Item* v = sc.find(e.name)) return *v;
        if (e.name == "N") return {d_.N};
        if (e.name == "M") return {d_.M};
        throw std::runtime_error("oracle: no scalar value for " + e.name);
      }
      case SExpr::Kind::Tuple: {
        Item out;
        for (const auto& a : e.args) out.push_back(scalar(*a, sc));
        return out;
      }
      case SExpr::Kind::Index: {
        if (e.args[0]->kind != SExpr::Kind::Ident || e.args[0]->name != "w" || e.args.size() != 2) {
          throw std::runtime_error("oracle: only w[k] is indexable");
        }
        auto k = scalar(*e.args[1], sc);
        if (k < 0 || k >= static_cast<std::int64_t>(d_.w.size())) throw std::runtime_error("oracle: w out of range");
        return {d_.w[static_cast<std::size_t>(k)]};
      }
      case SExpr::Kind::Prim: return {prim(e, sc)};
      case SExpr::Kind::Sum: {
        const SExpr& inner = *e.args[0];
        if (inner.kind != SExpr::Kind::Compr) throw std::runtime_error("oracle: sum over a raw stream");
        std::int64_t total = 0;
        for (const auto& it : comprehension(*inner.compr, sc)) total += it.at(0);
        return {total};
      }
      default: throw std::runtime_error("oracle: unsupported expression");
    }
  }

  std::int64_t scalar(const SExpr& e, Scope& sc) {
    auto v = value(e, sc);
    if (v.size() != 1) throw std::runtime_error("oracle: expected a scalar");
    return v[0];
  }

  std::int64_t prim(const SExpr& e, Scope& sc) {
    auto a = [&](std::size_t i) { return scalar(*e.args[i], sc); };
    switch (e.op) {
      case PrimOp::Add: return a(0) + a(1);
      case PrimOp::Sub: return a(0) - a(1);
      case PrimOp::Mul: return a(0) * a(1);
      case PrimOp::Mod: return floor_mod(a(0), a(1));
      case PrimOp::Eq: return a(0) == a(1);
      case PrimOp::Neq: return a(0) != a(1);
      case PrimOp::Lt: return a(0) < a(1);
      case PrimOp::Le: return a(0) <= a(1);
      case PrimOp::And: return a(0) && a(1);
      case PrimOp::Or: return a(0) || a(1);
      case PrimOp::Not: return !a(0);
      case PrimOp::Count: return static_cast<std::int64_t>(source(*e.args[0], sc).size());
      default: throw std::runtime_error("oracle: unsupported operator");
    }
  }

  std::vector<Item> source(const SExpr& e, Scope& sc) {
    if (e.kind == SExpr::Kind::Ident && !sc.find(e.name)) {
      if (e.name == "S") {
        std::vector<Item> out;
        for (auto v : d_.S) out.push_back({v});
        return out;
      }
      if (e.name == "P") {
        std::vector<Item> out;
        for (auto [x, y] : d_.P) out.push_back({x, y});
        return out;
      }
    }
    if (e.kind == SExpr::Kind::Compr) return comprehension(*e.compr, sc);
    std::vector<Item> out;
    for (std::int64_t k = 0, n = scalar(e, sc); k < n; ++k) out.push_back({k});
    return out;
  }

  std::vector<Item> comprehension(const mt::SurfaceComprehension& c, Scope& sc) {
    std::vector<Item> out;
    std::function<void(std::size_t)> loop = [&](std::size_t k) {
      if (k == c.clauses.size()) {
        out.push_back(value(*c.head, sc));
        return;
      }
      const auto& cl = c.clauses[k];
      if (cl.kind == mt::SClause::Kind::If) {
        if (scalar(*cl.expr, sc)) loop(k + 1);
        return;
      }
      for (const auto& item : source(*cl.expr, sc)) {
        const auto& names = cl.pattern.names;
        if (names.size() == 1) {
          sc.vars.emplace_back(names[0], item);
        } else {
          if (item.size() != names.size()) throw std::runtime_error("oracle: tuple arity");
          for (std::size_t i = 0; i < names.size(); ++i) sc.vars.emplace_back(names[i], Item{item[i]});
        }
        loop(k + 1);
        sc.vars.resize(sc.vars.size() - names.size());
      }
    };
    loop(0);
    return out;
  }

 private:
  const Data& d_;
};

}  // namespace

std::vector<Item> run_comprehension(const mt::SurfaceComprehension& c, const Data& d) {
  Scope sc;
  return Interp(d).comprehension(c, sc);
}

std::int64_t run_expr(const mt::SExpr& e, const Data& d) {
  Scope sc;
  return Interp(d).scalar(e, sc);
}

Item to_item(const mt::Value& v) {
  if (v.kind() == mt::Value::Kind::Tuple) {
    Item out;
    for (const auto& x : v.items()) out.push_back(x.as_int());
    return out;
  }
  if (v.kind() == mt::Value::Kind::Bool) return {v.as_bool() ? 1 : 0};
  return {v.as_int()};
}

std::vector<Item> to_items(const mt::Value& seq) {
  std::vector<Item> out;
  for (const auto& v : seq.items()) out.push_back(to_item(v));
  return out;
}

std::string random_comprehension(std::mt19937& rng, int max_gens, int max_guards) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  static const char* names[] = {"i", "j", "k"};
  std::vector<std::string> ints;  // bound integer names usable in guards/heads
  std::vector<std::string> clauses;
  int gens = pick(1, max_gens);
  int guards = pick(0, max_guards);
  std::vector<bool> guard_after(static_cast<std::size_t>(gens), false);
  std::vector<int> per_gen(static_cast<std::size_t>(gens), 0);
  for (int g = 0; g < guards; ++g) ++per_gen[static_cast<std::size_t>(pick(0, gens - 1))];

  auto any = [&]() { return ints[static_cast<std::size_t>(pick(0, static_cast<int>(ints.size()) - 1))]; };
  auto atom = [&]() -> std::string {
    if (pick(0, 3) == 0) return std::to_string(pick(0, 3));
    return any();
  };
  auto guard = [&]() -> std::string {
    switch (pick(0, 5)) {
      case 0: return atom() + " mod 2 == " + std::to_string(pick(0, 1));
      case 1: return atom() + " < " + atom();
      case 2: return atom() + " != " + atom();
      case 3: return atom() + " + " + atom() + " <= " + std::to_string(pick(1, 5));
      case 4: return "not (" + atom() + " == " + std::to_string(pick(0, 2)) + ")";
      default: return atom() + " < 2 or " + atom() + " == 0";
    }
  };

  for (int g = 0; g < gens; ++g) {
    std::string v = names[pick(0, 2)];
    int kind = pick(0, ints.empty() ? 3 : 5);
    std::string cl;
    switch (kind) {
      case 0: cl = "for " + v + " in N"; break;
      case 1: cl = "for " + v + " in M"; break;
      case 2: cl = "for " + v + " in S"; break;
      case 3: {
        std::string a = names[pick(0, 2)];
        std::string b = a == "i" ? "j" : "i";
        cl = "for (" + a + ", " + b + ") in P";
        ints.erase(std::remove(ints.begin(), ints.end(), a), ints.end());
        ints.erase(std::remove(ints.begin(), ints.end(), b), ints.end());
        ints.push_back(a);
        ints.push_back(b);
        break;
      }
      case 4: cl = "for " + v + " in " + any() + " + 1"; break;
      default: cl = "for " + v + " in [" + any() + " + x for x in 3 if x != 1]"; break;
    }
    if (kind != 3) {
      ints.erase(std::remove(ints.begin(), ints.end(), v), ints.end());
      ints.push_back(v);
    }
    clauses.push_back(cl);
    for (int k = 0; k < per_gen[static_cast<std::size_t>(g)]; ++k) clauses.push_back("if " + guard());
  }

  std::string head;
  switch (pick(0, 4)) {
    case 0: head = any(); break;
    case 1: head = any() + " * " + atom() + " + 1"; break;
    case 2: head = "w[" + any() + "]"; break;
    case 3: head = "(" + atom() + " + 2) mod 3"; break;
    default: head = "w[" + any() + "] - " + atom(); break;
  }
  std::string out = "[" + head;
  for (const auto& c : clauses) out += " " + c;
  return out + "]";
}

std::string wrap_objective(const std::string& objective) {
  return "problem \"oracle\" min;\nparam N;\nparam M;\nset S;\nset P;\nparam w[16];\nobjective: " +
         objective + ";\n";
}

// ---------------------------------------------------------------------------

RandomGraph random_egraph(std::mt19937& rng, int max_classes) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  RandomGraph r;
  static const char* leaves[] = {"a", "b", "c"};
  static const char* ops[] = {"f", "g", "h"};
  for (const char* op : leaves) r.cm.op_costs[op] = pick(1, 6);
  for (const char* op : ops) r.cm.op_costs[op] = pick(0, 4);
  r.cm.default_cost = 1;

  std::vector<mt::ClassId> classes;
  int attempts = pick(3, 12);
  for (int k = 0; k < attempts; ++k) {
    if (r.g.class_count() >= static_cast<std::size_t>(max_classes)) break;
    mt::ENode n;
    if (classes.empty() || pick(0, 3) == 0) {
      n.op = leaves[pick(0, 2)];
    } else {
      int which = pick(0, 2);
      n.op = ops[which];
      int arity = which == 0 ? 1 : 2;
      for (int a = 0; a < arity; ++a) {
        n.kids.push_back(classes[static_cast<std::size_t>(pick(0, static_cast<int>(classes.size()) - 1))]);
      }
    }
    classes.push_back(r.g.add(n));
  }
  int merges = pick(0, 3);
  for (int k = 0; k < merges && classes.size() > 1; ++k) {
    auto a = classes[static_cast<std::size_t>(pick(0, static_cast<int>(classes.size()) - 1))];
    auto b = classes[static_cast<std::size_t>(pick(0, static_cast<int>(classes.size()) - 1))];
    r.g.merge(a, b);
  }
  r.g.rebuild();

  std::vector<mt::NodeId> live;
  for (mt::ClassId c = 0; c < r.g.parents().size(); ++c) {
    if (r.g.find(c) != c) continue;
    for (auto n : r.g.nodes_in(c)) live.push_back(n);
  }
  for (auto n : live) {
    double c = r.cm.op_costs.at(r.g.node(n).op);
    if (pick(0, 3) == 0) {
      c = pick(0, 7);
      r.g.set_cost(n, c);
    }
    r.cost[n] = c;
  }
  if (pick(0, 4) == 0 && !live.empty()) r.g.subsume(live[static_cast<std::size_t>(pick(0, static_cast<int>(live.size()) - 1))]);
  r.root = r.g.find(classes[static_cast<std::size_t>(pick(0, static_cast<int>(classes.size()) - 1))]);
  return r;
}

double brute_force_min_cost(const RandomGraph& r) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<mt::ClassId> cls;
  std::vector<std::vector<mt::NodeId>> options;
  std::map<mt::ClassId, std::size_t> slot;
  for (mt::ClassId c = 0; c < r.g.parents().size(); ++c) {
    if (r.g.find(c) != c) continue;
    std::vector<mt::NodeId> opts;
    for (auto n : r.g.nodes_in(c)) {
      if (!r.g.is_subsumed(n)) opts.push_back(n);
    }
    slot[c] = cls.size();
    cls.push_back(c);
    options.push_back(opts);
  }
  double best = inf;
  std::vector<std::size_t> choice(cls.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == cls.size()) {
      std::vector<int> state(cls.size(), 0);  // 0 new, 1 on path, 2 done
      std::vector<double> memo(cls.size(), inf);
      std::function<double(mt::ClassId)> cost = [&](mt::ClassId c) -> double {
        std::size_t s = slot.at(r.g.find(c));
        if (state[s] == 1) return inf;
        if (state[s] == 2) return memo[s];
        if (options[s].empty()) return inf;
        state[s] = 1;
        mt::NodeId n = options[s][choice[s]];
        double total = r.cost.at(n);
        for (auto kid : r.g.node(n).kids) total += cost(kid);
        state[s] = 2;
        return memo[s] = total;
      };
      best = std::min(best, cost(r.root));
      return;
    }
    if (options[k].empty()) {
      rec(k + 1);
      return;
    }
    for (std::size_t i = 0; i < options[k].size(); ++i) {
      choice[k] = i;
      rec(k + 1);
    }
  };
  rec(0);
  return best;
}

double tree_cost(const RandomGraph& r, const mt::ExtractedTerm& t) {
  std::function<std::pair<mt::ClassId, double>(const mt::ExtractedTerm&)> walk =
      [&](const mt::ExtractedTerm& x) -> std::pair<mt::ClassId, double> {
    mt::ENode n{x.op, x.leaf, {}};
    double total = 0;
    for (const auto& k : x.kids) {
      auto [c, v] = walk(k);
      n.kids.push_back(c);
      total += v;
    }
    auto id = r.g.lookup_node(n);
    if (!id) throw std::runtime_error("extracted node not in graph");
    if (r.g.is_subsumed(*id)) throw std::runtime_error("extracted a subsumed node");
    return {r.g.class_of(*id), total + r.cost.at(*id)};
  };
  return walk(t).second;
}

}  // namespace oracle
