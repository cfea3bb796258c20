#include <algorithm>
#include <cctype>
#include <limits>
#include <map>

#include "modelterm/engine.hpp"

namespace mt {

namespace {

constexpr ClassId kUnbound = std::numeric_limits<ClassId>::max();

// ---------------------------------------------------------------------------
// s-expression reader

struct SNode {
  enum class Kind { Symbol, Int, Float, String, List };
  Kind kind = Kind::Symbol;
  std::string text;
  std::int64_t ival = 0;
  double fval = 0.0;
  std::vector<SNode> items;
  int line = 1;
};

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  std::vector<SNode> read_all() {
    std::vector<SNode> out;
    for (skip(); pos_ < s_.size(); skip()) out.push_back(read());
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw EngineError("rules:" + std::to_string(line_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == ';') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  SNode read() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    SNode n;
    n.line = line_;
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      n.kind = SNode::Kind::List;
      for (skip(); pos_ < s_.size() && s_[pos_] != ')'; skip()) n.items.push_back(read());
      if (pos_ >= s_.size()) fail("unclosed '('");
      ++pos_;
      return n;
    }
    if (c == ')') fail("unexpected ')'");
    if (c == '"') {
      ++pos_;
      n.kind = SNode::Kind::String;
      while (pos_ < s_.size() && s_[pos_] != '"') n.text += s_[pos_++];
      if (pos_ >= s_.size()) fail("unterminated string");
      ++pos_;
      return n;
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
           s_[pos_] != '(' && s_[pos_] != ')' && s_[pos_] != ';') {
      ++pos_;
    }
    n.text = std::string(s_.substr(start, pos_ - start));
    bool numeric = !n.text.empty() &&
                   (std::isdigit(static_cast<unsigned char>(n.text[0])) ||
                    (n.text.size() > 1 && n.text[0] == '-' &&
                     std::isdigit(static_cast<unsigned char>(n.text[1]))));
    if (numeric) {
      std::size_t used = 0;
      if (n.text.find_first_of(".eE") != std::string::npos) {
        n.kind = SNode::Kind::Float;
        n.fval = std::stod(n.text, &used);
      } else {
        n.kind = SNode::Kind::Int;
        n.ival = std::stoll(n.text, &used);
      }
      if (used != n.text.size()) fail("bad number '" + n.text + "'");
    }
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

[[noreturn]] void bad(const SNode& n, const std::string& msg) {
  throw EngineError("rules:" + std::to_string(n.line) + ": " + msg);
}

const std::string& head_of(const SNode& n) {
  if (n.kind != SNode::Kind::List || n.items.empty() || n.items[0].kind != SNode::Kind::Symbol) {
    bad(n, "expected a form (head ...)");
  }
  return n.items[0].text;
}

Pat to_pat(const SNode& n) {
  switch (n.kind) {
    case SNode::Kind::Int:
      return Pat::integer(n.ival);
    case SNode::Kind::Float: {
      Pat p = Pat::node("f64");
      p.leaf = n.fval;
      return p;
    }
    case SNode::Kind::String:
      return Pat::string(n.text);
    case SNode::Kind::Symbol: {
      std::string name = n.text;
      if (name.size() > 1 && name[0] == '?') name = name.substr(1);
      return Pat::variable(name);
    }
    case SNode::Kind::List: {
      std::vector<Pat> kids;
      for (std::size_t i = 1; i < n.items.size(); ++i) kids.push_back(to_pat(n.items[i]));
      return Pat::node(head_of(n), std::move(kids));
    }
  }
  bad(n, "bad pattern");
}

std::vector<Pat> tail_pats(const SNode& n) {
  std::vector<Pat> out;
  for (std::size_t i = 1; i < n.items.size(); ++i) out.push_back(to_pat(n.items[i]));
  return out;
}

Premise to_premise(const SNode& n) {
  const auto& h = head_of(n);
  Premise p;
  p.head = h;
  p.args = tail_pats(n);
  if (h == "=" || h == "!=") {
    p.kind = h == "=" ? Premise::Kind::Eq : Premise::Kind::Neq;
    if (p.args.size() != 2) bad(n, "'" + h + "' takes two arguments");
  }
  return p;
}

Action to_action(const SNode& n) {
  const auto& h = head_of(n);
  Action a;
  if (h == "union") {
    a.kind = Action::Kind::Union;
    a.args = tail_pats(n);
    if (a.args.size() != 2) bad(n, "union takes two arguments");
  } else if (h == "set-cost") {
    a.kind = Action::Kind::SetCost;
    a.args = tail_pats(n);
    if (a.args.size() != 2) bad(n, "set-cost takes a term and a cost");
  } else if (h == "subsume") {
    a.kind = Action::Kind::Subsume;
    a.args = tail_pats(n);
    if (a.args.size() != 1) bad(n, "subsume takes one term");
  } else if (h == "delete") {
    if (n.items.size() != 2) bad(n, "delete takes one fact");
    a.kind = Action::Kind::Delete;
    a.relation = head_of(n.items[1]);
    a.args = tail_pats(n.items[1]);
  } else {
    a.kind = Action::Kind::Assert;
    a.relation = h;
    a.args = tail_pats(n);
  }
  return a;
}

std::map<std::string, const SNode*> keywords(const SNode& form, std::size_t from) {
  std::map<std::string, const SNode*> kw;
  for (std::size_t i = from; i < form.items.size(); i += 2) {
    const auto& k = form.items[i];
    if (k.kind != SNode::Kind::Symbol || k.text.empty() || k.text[0] != ':' ||
        i + 1 >= form.items.size()) {
      bad(k, "expected ':keyword value'");
    }
    kw[k.text] = &form.items[i + 1];
  }
  return kw;
}

std::string symbol_text(const SNode& n) {
  if (n.kind != SNode::Kind::Symbol && n.kind != SNode::Kind::String) bad(n, "expected a name");
  return n.text;
}

void read_form(const SNode& form, const std::string& ruleset, RuleProgram& out) {
  const auto& h = head_of(form);
  if (h == "relation") {
    if (form.items.size() != 3 || form.items[2].kind != SNode::Kind::List) {
      bad(form, "expected (relation name (Sort ...))");
    }
    out.relations.emplace_back(symbol_text(form.items[1]), form.items[2].items.size());
  } else if (h == "with-ruleset") {
    if (form.items.size() < 2) bad(form, "with-ruleset needs a name");
    for (std::size_t i = 2; i < form.items.size(); ++i) {
      read_form(form.items[i], symbol_text(form.items[1]), out);
    }
  } else if (h == "ruleset" || h == "sort" || h == "datatype" || h == "function") {
    // declarations only matter to typed engines
  } else if (h == "rule") {
    if (form.items.size() < 3 || form.items[1].kind != SNode::Kind::List ||
        form.items[2].kind != SNode::Kind::List) {
      bad(form, "expected (rule (premises) (actions) ...)");
    }
    Rule r;
    r.ruleset = ruleset;
    for (const auto& p : form.items[1].items) r.premises.push_back(to_premise(p));
    for (const auto& a : form.items[2].items) r.actions.push_back(to_action(a));
    auto kw = keywords(form, 3);
    if (kw.count(":ruleset")) r.ruleset = symbol_text(*kw[":ruleset"]);
    if (kw.count(":name")) r.name = symbol_text(*kw[":name"]);
    if (r.name.empty()) r.name = "rule@" + std::to_string(form.line);
    out.rules.push_back(std::move(r));
  } else if (h == "rewrite" || h == "birewrite") {
    if (form.items.size() < 3) bad(form, "expected (rewrite lhs rhs ...)");
    auto kw = keywords(form, 3);
    Pat lhs = to_pat(form.items[1]);
    Pat rhs = to_pat(form.items[2]);
    if (lhs.is_var()) bad(form, "rewrite left-hand side must be a term");
    std::vector<Premise> when;
    if (kw.count(":when")) {
      if (kw[":when"]->kind != SNode::Kind::List) bad(form, ":when expects a list");
      for (const auto& p : kw[":when"]->items) when.push_back(to_premise(p));
    }
    std::string rs = kw.count(":ruleset") ? symbol_text(*kw[":ruleset"]) : ruleset;
    auto one = [&](const Pat& from, const Pat& to, const std::string& suffix) {
      Rule r;
      r.ruleset = rs;
      r.name = "rewrite@" + std::to_string(form.line) + suffix;
      Premise p;
      p.kind = Premise::Kind::Eq;
      p.args = {Pat::variable("__root"), from};
      r.premises.push_back(std::move(p));
      for (const auto& w : when) r.premises.push_back(w);
      Action a;
      a.kind = Action::Kind::Union;
      a.args = {Pat::variable("__root"), to};
      r.actions.push_back(std::move(a));
      out.rules.push_back(std::move(r));
    };
    one(lhs, rhs, "");
    if (h == "birewrite") {
      if (rhs.is_var()) bad(form, "birewrite right-hand side must be a term");
      one(rhs, lhs, "<");
    }
  } else {
    bad(form, "unknown form '" + h + "'");
  }
}

}  // namespace

RuleProgram parse_rules(std::string_view text) {
  RuleProgram out;
  for (const auto& form : Reader(text).read_all()) read_form(form, "", out);
  return out;
}

// ---------------------------------------------------------------------------
// Compilation

struct EGraph::CompiledPat {
  int var = -1;
  std::string op;
  Leaf leaf;
  std::vector<CompiledPat> kids;
};

struct EGraph::CompiledRule {
  enum class PKind { Fact, Exists, Eq, Neq };
  struct CPremise {
    PKind kind;
    std::string rel;
    std::vector<CompiledPat> args;
  };
  struct CAction {
    Action::Kind kind;
    std::string rel;  // empty Assert: add the term
    std::vector<CompiledPat> args;
  };
  std::string name;
  std::string ruleset;
  std::vector<CPremise> premises;
  std::vector<CAction> actions;
  std::size_t nvars = 0;
};

namespace {

class VarTable {
 public:
  int id(const std::string& name) {
    auto [it, fresh] = ids_.emplace(name, static_cast<int>(ids_.size()));
    return it->second;
  }
  bool known(const std::string& name) const { return ids_.count(name) > 0; }
  std::size_t size() const { return ids_.size(); }

 private:
  std::map<std::string, int> ids_;
};

void pat_vars(const Pat& p, std::vector<std::string>& out) {
  if (p.is_var()) {
    out.push_back(p.var);
    return;
  }
  for (const auto& k : p.kids) pat_vars(k, out);
}

}  // namespace

void EGraph::add_rule(Rule r) {
  auto cr = std::make_shared<CompiledRule>();
  cr->name = r.name;
  cr->ruleset = r.ruleset;
  VarTable vars;
  std::function<CompiledPat(const Pat&)> compile = [&](const Pat& p) {
    CompiledPat c;
    if (p.is_var()) {
      c.var = vars.id(p.var);
      return c;
    }
    c.op = p.op;
    c.leaf = p.leaf;
    for (const auto& k : p.kids) c.kids.push_back(compile(k));
    return c;
  };
  auto fail = [&](const std::string& msg) {
    throw EngineError("rule " + r.name + ": " + msg);
  };

  // Disequalities test bound terms, so they run after everything else.
  std::stable_partition(r.premises.begin(), r.premises.end(),
                        [](const Premise& p) { return p.kind != Premise::Kind::Neq; });
  std::set<std::string> bound;
  for (const auto& p : r.premises) {
    CompiledRule::CPremise cp;
    std::vector<std::string> pv;
    for (const auto& a : p.args) pat_vars(a, pv);
    switch (p.kind) {
      case Premise::Kind::Atom:
        if (has_relation(p.head)) {
          cp.kind = CompiledRule::PKind::Fact;
          cp.rel = p.head;
          if (relations_.at(p.head).arity != p.args.size()) {
            fail("relation " + p.head + " used with the wrong arity");
          }
          for (const auto& a : p.args) cp.args.push_back(compile(a));
        } else {
          cp.kind = CompiledRule::PKind::Exists;
          cp.args.push_back(compile(Pat::node(p.head, p.args)));
        }
        break;
      case Premise::Kind::Eq:
        if (p.args[0].is_var() && p.args[1].is_var() && !bound.count(p.args[0].var) &&
            !bound.count(p.args[1].var)) {
          fail("'=' between two unbound variables");
        }
        cp.kind = CompiledRule::PKind::Eq;
        for (const auto& a : p.args) cp.args.push_back(compile(a));
        break;
      case Premise::Kind::Neq:
        for (const auto& v : pv) {
          if (!bound.count(v)) fail("variable " + v + " in '!=' is not bound by a pattern");
        }
        cp.kind = CompiledRule::PKind::Neq;
        for (const auto& a : p.args) cp.args.push_back(compile(a));
        break;
    }
    bound.insert(pv.begin(), pv.end());
    cr->premises.push_back(std::move(cp));
  }
  for (const auto& a : r.actions) {
    std::vector<std::string> av;
    for (const auto& x : a.args) pat_vars(x, av);
    for (const auto& v : av) {
      if (!bound.count(v)) fail("action uses unbound variable " + v);
    }
    CompiledRule::CAction ca;
    ca.kind = a.kind;
    ca.rel = a.relation;
    if (a.kind == Action::Kind::Assert && !has_relation(a.relation)) {
      ca.rel.clear();
      ca.args.push_back(compile(Pat::node(a.relation, a.args)));
    } else {
      if ((a.kind == Action::Kind::Assert || a.kind == Action::Kind::Delete) &&
          relations_.at(a.relation).arity != a.args.size()) {
        fail("relation " + a.relation + " used with the wrong arity");
      }
      if (a.kind == Action::Kind::Delete && !has_relation(a.relation)) {
        fail("delete of unknown relation " + a.relation);
      }
      for (const auto& x : a.args) ca.args.push_back(compile(x));
    }
    cr->actions.push_back(std::move(ca));
  }
  cr->nvars = vars.size();
  rules_.push_back(std::move(cr));
}

void EGraph::add_program(const RuleProgram& p) {
  for (const auto& [name, arity] : p.relations) declare_relation(name, arity);
  for (const auto& r : p.rules) add_rule(r);
}

// ---------------------------------------------------------------------------
// Matching

namespace {
struct Timeout {};
}  // namespace

class EGraph::Matcher {
 public:
  using Subst = std::vector<ClassId>;
  using Cont = std::function<void()>;

  Matcher(const EGraph& g, const CompiledRule& r, const RunLimits& lim)
      : g_(g), r_(r), lim_(lim), s_(r.nvars, kUnbound) {}

  std::set<Subst> run() {
    premise(0);
    return std::move(found_);
  }

 private:
  void tick() {
    if (lim_.deadline && (++steps_ & 1023) == 0 &&
        std::chrono::steady_clock::now() > *lim_.deadline) {
      throw Timeout{};
    }
  }

  void premise(std::size_t i) {
    tick();
    if (i == r_.premises.size()) {
      found_.insert(s_);
      return;
    }
    const auto& p = r_.premises[i];
    auto next = [&] { premise(i + 1); };
    switch (p.kind) {
      case CompiledRule::PKind::Fact: {
        const auto& facts = g_.relations_.at(p.rel).facts;
        for (const auto& f : facts) fact_args(p.args, f, 0, next);
        break;
      }
      case CompiledRule::PKind::Exists:
        enumerate(p.args[0], [&](ClassId) { next(); });
        break;
      case CompiledRule::PKind::Eq: {
        const auto& a = p.args[0];
        const auto& b = p.args[1];
        if (a.var >= 0 && s_[a.var] != kUnbound) {
          match(b, g_.find(s_[a.var]), next);
        } else if (b.var >= 0 && s_[b.var] != kUnbound) {
          match(a, g_.find(s_[b.var]), next);
        } else if (a.var < 0) {
          enumerate(a, [&](ClassId c) { match(b, c, next); });
        } else {
          enumerate(b, [&](ClassId c) { match(a, c, next); });
        }
        break;
      }
      case CompiledRule::PKind::Neq: {
        auto x = resolve(p.args[0]);
        auto y = resolve(p.args[1]);
        if (x && y && *x != *y) next();
        break;
      }
    }
  }

  void fact_args(const std::vector<CompiledPat>& args, const std::vector<ClassId>& f,
                 std::size_t i, const Cont& k) {
    if (i == args.size()) {
      k();
      return;
    }
    match(args[i], g_.find(f[i]), [&] { fact_args(args, f, i + 1, k); });
  }

  bool leaf_ok(const CompiledPat& p, const ENode& n) const {
    return n.kids.size() == p.kids.size() && n.leaf == p.leaf;
  }

  void match(const CompiledPat& p, ClassId c, const Cont& k) {
    tick();
    if (p.var >= 0) {
      ClassId& slot = s_[p.var];
      if (slot == kUnbound) {
        slot = c;
        k();
        slot = kUnbound;
      } else if (g_.find(slot) == c) {
        k();
      }
      return;
    }
    auto it = g_.by_op_.find(p.op);
    if (it == g_.by_op_.end()) return;
    for (NodeId n : it->second) {
      if (!g_.alive_[n] || g_.class_of(n) != c) continue;
      const ENode& node = g_.nodes_[n];
      if (!leaf_ok(p, node)) continue;
      kids(p, node, 0, k);
    }
  }

  void kids(const CompiledPat& p, const ENode& node, std::size_t i, const Cont& k) {
    if (i == p.kids.size()) {
      k();
      return;
    }
    match(p.kids[i], g_.find(node.kids[i]), [&] { kids(p, node, i + 1, k); });
  }

  void enumerate(const CompiledPat& p, const std::function<void(ClassId)>& k) {
    auto it = g_.by_op_.find(p.op);
    if (it == g_.by_op_.end()) return;
    for (NodeId n : it->second) {
      if (!g_.alive_[n]) continue;
      const ENode& node = g_.nodes_[n];
      if (!leaf_ok(p, node)) continue;
      ClassId c = g_.class_of(n);
      kids(p, node, 0, [&] { k(c); });
    }
  }

  std::optional<ClassId> resolve(const CompiledPat& p) const {
    if (p.var >= 0) {
      if (s_[p.var] == kUnbound) return std::nullopt;
      return g_.find(s_[p.var]);
    }
    ENode n{p.op, p.leaf, {}};
    for (const auto& k : p.kids) {
      auto c = resolve(k);
      if (!c) return std::nullopt;
      n.kids.push_back(*c);
    }
    return g_.lookup(std::move(n));
  }

  const EGraph& g_;
  const CompiledRule& r_;
  const RunLimits& lim_;
  Subst s_;
  std::set<Subst> found_;
  std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Actions and the run loop

ClassId EGraph::instantiate(const CompiledPat& p, const std::vector<ClassId>& subst) {
  if (p.var >= 0) return find(subst[p.var]);
  return class_of(instantiate_node(p, subst));
}

NodeId EGraph::instantiate_node(const CompiledPat& p, const std::vector<ClassId>& subst) {
  if (p.var >= 0) {
    // A bare variable names a class; take its first live node.
    auto ns = nodes_in(subst[p.var]);
    if (ns.empty()) throw EngineError("empty e-class");
    return ns.front();
  }
  ENode n{p.op, p.leaf, {}};
  for (const auto& k : p.kids) n.kids.push_back(instantiate(k, subst));
  return add_node(std::move(n));
}

void EGraph::apply(const CompiledRule& r, const std::vector<ClassId>& subst) {
  for (const auto& a : r.actions) {
    switch (a.kind) {
      case Action::Kind::Assert:
        if (a.rel.empty()) {
          instantiate(a.args[0], subst);
        } else {
          std::vector<ClassId> args;
          for (const auto& x : a.args) args.push_back(instantiate(x, subst));
          assert_fact(a.rel, std::move(args));
        }
        break;
      case Action::Kind::Union:
        merge(instantiate(a.args[0], subst), instantiate(a.args[1], subst));
        break;
      case Action::Kind::SetCost: {
        NodeId n = instantiate_node(a.args[0], subst);
        double cost = 0;
        const auto& c = a.args[1];
        if (c.var < 0 && c.op == "i64") {
          cost = static_cast<double>(std::get<std::int64_t>(c.leaf));
        } else if (c.var < 0 && c.op == "f64") {
          cost = std::get<double>(c.leaf);
        } else {
          bool found = false;
          for (NodeId m : nodes_in(instantiate(c, subst))) {
            if (auto* i = std::get_if<std::int64_t>(&nodes_[m].leaf)) {
              cost = static_cast<double>(*i);
              found = true;
              break;
            }
          }
          if (!found) throw EngineError("rule " + r.name + ": set-cost needs an integer cost");
        }
        set_cost(n, cost);
        break;
      }
      case Action::Kind::Subsume:
        subsume(instantiate_node(a.args[0], subst));
        break;
      case Action::Kind::Delete: {
        std::vector<ClassId> args;
        bool present = true;
        for (const auto& x : a.args) {
          if (x.var >= 0) {
            args.push_back(find(subst[x.var]));
            continue;
          }
          ENode n{x.op, x.leaf, {}};
          for (const auto& k : x.kids) n.kids.push_back(instantiate(k, subst));
          auto c = lookup(std::move(n));
          if (!c) {
            present = false;
            break;
          }
          args.push_back(*c);
        }
        if (present) delete_fact(a.rel, std::move(args));
        break;
      }
    }
  }
}

RunReport EGraph::run_rulesets(const std::vector<std::string>& rulesets, const RunLimits& limits) {
  std::vector<const CompiledRule*> active;
  for (const auto& r : rules_) {
    if (std::find(rulesets.begin(), rulesets.end(), r->ruleset) != rulesets.end()) {
      active.push_back(r.get());
    }
  }
  rebuild();
  RunReport rep;
  while (true) {
    if (rep.iterations >= limits.iteration_limit) return rep;
    if (limits.deadline && std::chrono::steady_clock::now() > *limits.deadline) {
      rep.timed_out = true;
      return rep;
    }
    std::vector<std::pair<const CompiledRule*, std::set<std::vector<ClassId>>>> matches;
    try {
      for (const auto* r : active) matches.emplace_back(r, Matcher(*this, *r, limits).run());
    } catch (const Timeout&) {
      rep.timed_out = true;
      return rep;
    }
    auto before = version_;
    for (const auto& [r, subs] : matches) {
      for (const auto& s : subs) apply(*r, s);
    }
    rebuild();
    if (version_ == before) {
      rep.saturated = true;
      return rep;
    }
    ++rep.iterations;
  }
}

RunReport EGraph::run_ruleset(const std::string& ruleset, const RunLimits& limits) {
  return run_rulesets({ruleset}, limits);
}

}  // namespace mt
