#include "modelterm/engine.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>

namespace mt {

namespace {

void hash_mix(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

}  // namespace

std::size_t ENodeHash::operator()(const ENode& n) const {
  std::size_t h = std::hash<std::string>{}(n.op);
  hash_mix(h, n.leaf.index());
  if (auto* i = std::get_if<std::int64_t>(&n.leaf)) hash_mix(h, std::hash<std::int64_t>{}(*i));
  if (auto* d = std::get_if<double>(&n.leaf)) hash_mix(h, std::hash<double>{}(*d));
  if (auto* s = std::get_if<std::string>(&n.leaf)) hash_mix(h, std::hash<std::string>{}(*s));
  for (ClassId k : n.kids) hash_mix(h, k);
  return h;
}

Pat Pat::variable(std::string name) {
  Pat p;
  p.var = std::move(name);
  return p;
}

Pat Pat::node(std::string op, std::vector<Pat> kids) {
  Pat p;
  p.op = std::move(op);
  p.kids = std::move(kids);
  return p;
}

Pat Pat::integer(std::int64_t v) {
  Pat p;
  p.op = "i64";
  p.leaf = v;
  return p;
}

Pat Pat::string(std::string v) {
  Pat p;
  p.op = "String";
  p.leaf = std::move(v);
  return p;
}

double CostModel::node_cost(const EGraph& g, NodeId n) const {
  if (use_cost_table) {
    if (auto c = g.cost_override(n)) return *c;
  }
  auto it = op_costs.find(g.node(n).op);
  return it == op_costs.end() ? default_cost : it->second;
}

// ---------------------------------------------------------------------------
// Terms and union-find

ClassId EGraph::find(ClassId c) const {
  if (c >= parent_.size()) throw EngineError("unknown e-class " + std::to_string(c));
  ClassId root = c;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[c] != root) {
    ClassId next = parent_[c];
    parent_[c] = root;
    c = next;
  }
  return root;
}

ENode EGraph::canonical(ENode n) const {
  for (auto& k : n.kids) k = find(k);
  return n;
}

NodeId EGraph::add_node(ENode n) {
  n = canonical(std::move(n));
  if (auto it = memo_.find(n); it != memo_.end()) return it->second;
  auto id = static_cast<NodeId>(nodes_.size());
  auto cls = static_cast<ClassId>(parent_.size());
  parent_.push_back(cls);
  by_op_[n.op].push_back(id);
  memo_.emplace(n, id);
  nodes_.push_back(std::move(n));
  node_class_.push_back(cls);
  alive_.push_back(true);
  ++version_;
  return id;
}

ClassId EGraph::add(ENode n) { return class_of(add_node(std::move(n))); }

ClassId EGraph::add_int(std::int64_t v) { return add(ENode{"i64", v, {}}); }

ClassId EGraph::add_string(std::string v) { return add(ENode{"String", std::move(v), {}}); }

std::optional<NodeId> EGraph::lookup_node(ENode n) const {
  for (auto& k : n.kids) {
    if (k >= parent_.size()) return std::nullopt;
    k = find(k);
  }
  auto it = memo_.find(n);
  if (it == memo_.end()) return std::nullopt;
  return it->second;
}

std::optional<ClassId> EGraph::lookup(ENode n) const {
  auto id = lookup_node(std::move(n));
  if (!id) return std::nullopt;
  return class_of(*id);
}

ClassId EGraph::merge(ClassId a, ClassId b) {
  a = find(a);
  b = find(b);
  if (a == b) return a;
  if (b < a) std::swap(a, b);
  parent_[b] = a;
  dirty_ = true;
  ++version_;
  return a;
}

void EGraph::rebuild() {
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<ENode, NodeId, ENodeHash> memo;
    memo.reserve(nodes_.size());
    for (NodeId n = 0; n < nodes_.size(); ++n) {
      if (!alive_[n]) continue;
      ENode c = canonical(nodes_[n]);
      auto [it, fresh] = memo.emplace(c, n);
      if (fresh) {
        nodes_[n] = std::move(c);
        continue;
      }
      NodeId keep = it->second;
      if (find(node_class_[keep]) != find(node_class_[n])) {
        merge(node_class_[keep], node_class_[n]);
        changed = true;
      }
      alive_[n] = false;
      if (subsumed_.erase(n)) subsumed_.insert(keep);
      if (auto ct = cost_table_.find(n); ct != cost_table_.end()) {
        auto [kt, inserted] = cost_table_.emplace(keep, ct->second);
        if (!inserted) kt->second = std::min(kt->second, ct->second);
        cost_table_.erase(ct);
      }
    }
    memo_ = std::move(memo);
  }
  for (auto& [op, ids] : by_op_) {
    std::erase_if(ids, [&](NodeId n) { return !alive_[n]; });
  }
  for (auto& [name, rel] : relations_) {
    std::set<std::vector<ClassId>> canon;
    for (auto t : rel.facts) {
      for (auto& c : t) c = find(c);
      canon.insert(std::move(t));
    }
    rel.facts = std::move(canon);
  }
  dirty_ = false;
}

std::vector<NodeId> EGraph::nodes_in(ClassId c) const {
  c = find(c);
  std::vector<NodeId> out;
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    if (alive_[n] && class_of(n) == c) out.push_back(n);
  }
  return out;
}

std::size_t EGraph::node_count() const {
  return static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), true));
}

std::size_t EGraph::class_count() const {
  std::size_t k = 0;
  for (ClassId c = 0; c < parent_.size(); ++c) k += parent_[c] == c;
  return k;
}

// ---------------------------------------------------------------------------
// Relations, costs, subsumption

void EGraph::declare_relation(const std::string& name, std::size_t arity) {
  auto [it, fresh] = relations_.emplace(name, Relation{arity, {}});
  if (!fresh && it->second.arity != arity) {
    throw EngineError("relation " + name + " redeclared with a different arity");
  }
}

bool EGraph::has_relation(const std::string& name) const { return relations_.count(name) > 0; }

namespace {

template <class R>
auto& relation_at(R& rels, const std::string& name, std::size_t arity) {
  auto it = rels.find(name);
  if (it == rels.end()) throw EngineError("unknown relation " + name);
  if (it->second.arity != arity) {
    throw EngineError("relation " + name + " expects " + std::to_string(it->second.arity) +
                      " arguments, got " + std::to_string(arity));
  }
  return it->second;
}

}  // namespace

bool EGraph::assert_fact(const std::string& rel, std::vector<ClassId> args) {
  auto& r = relation_at(relations_, rel, args.size());
  for (auto& c : args) c = find(c);
  bool fresh = r.facts.insert(std::move(args)).second;
  if (fresh) ++version_;
  return fresh;
}

bool EGraph::delete_fact(const std::string& rel, std::vector<ClassId> args) {
  auto& r = relation_at(relations_, rel, args.size());
  for (auto& c : args) c = find(c);
  bool gone = r.facts.erase(args) > 0;
  if (gone) ++version_;
  return gone;
}

bool EGraph::has_fact(const std::string& rel, std::vector<ClassId> args) const {
  auto& r = relation_at(relations_, rel, args.size());
  for (auto& c : args) c = find(c);
  for (const auto& f : r.facts) {
    bool same = true;
    for (std::size_t i = 0; i < f.size() && same; ++i) same = find(f[i]) == args[i];
    if (same) return true;
  }
  return false;
}

std::vector<std::vector<ClassId>> EGraph::query(
    const std::string& rel, const std::vector<std::optional<ClassId>>& pattern) const {
  auto& r = relation_at(relations_, rel, pattern.size());
  std::set<std::vector<ClassId>> out;
  for (auto f : r.facts) {
    bool ok = true;
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = find(f[i]);
      if (pattern[i] && find(*pattern[i]) != f[i]) ok = false;
    }
    if (ok) out.insert(std::move(f));
  }
  return {out.begin(), out.end()};
}

std::vector<std::vector<ClassId>> EGraph::facts(const std::string& rel) const {
  auto it = relations_.find(rel);
  if (it == relations_.end()) throw EngineError("unknown relation " + rel);
  return query(rel, std::vector<std::optional<ClassId>>(it->second.arity));
}

void EGraph::set_cost(NodeId n, double cost) {
  auto [it, fresh] = cost_table_.emplace(n, cost);
  if (fresh || it->second != cost) {
    it->second = cost;
    ++version_;
  }
}

std::optional<double> EGraph::cost_override(NodeId n) const {
  auto it = cost_table_.find(n);
  if (it == cost_table_.end()) return std::nullopt;
  return it->second;
}

void EGraph::subsume(NodeId n) {
  if (subsumed_.insert(n).second) ++version_;
}

void EGraph::subsume_term(Expr e) {
  auto n = lookup_term_node(e);
  if (!n) throw EngineError("cannot subsume absent term " + to_sexpr(e));
  subsume(*n);
}

bool EGraph::is_subsumed(NodeId n) const { return subsumed_.count(n) > 0; }

}  // namespace mt
