#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "modelterm/ast.hpp"

namespace mt {

class EngineError : public Error {
 public:
  using Error::Error;
};

using ClassId = std::uint32_t;
using NodeId = std::uint32_t;

/// Payload of primitive leaf nodes ("i64", "f64", "String").
using Leaf = std::variant<std::monostate, std::int64_t, double, std::string>;

struct ENode {
  std::string op;
  Leaf leaf;
  std::vector<ClassId> kids;

  friend bool operator==(const ENode&, const ENode&) = default;
};

struct ENodeHash {
  std::size_t operator()(const ENode& n) const;
};

// ---------------------------------------------------------------------------
// Rules

/// Rule pattern: a variable, or an operator applied to sub-patterns. Leaf
/// literals are operator nodes ("i64", "String", "f64") carrying a payload.
struct Pat {
  std::string var;  // non-empty for variables
  std::string op;
  Leaf leaf;
  std::vector<Pat> kids;

  bool is_var() const { return !var.empty(); }
  static Pat variable(std::string name);
  static Pat node(std::string op, std::vector<Pat> kids = {});
  static Pat integer(std::int64_t v);
  static Pat string(std::string v);
};

struct Premise {
  enum class Kind {
    Atom,  // relation fact, or term existence when `head` is not a relation
    Eq,
    Neq,
  };
  Kind kind = Kind::Atom;
  std::string head;
  std::vector<Pat> args;
};

struct Action {
  enum class Kind { Assert, Union, SetCost, Subsume, Delete };
  Kind kind = Kind::Assert;
  std::string relation;  // Assert/Delete; an empty relation on Assert just adds the term
  std::vector<Pat> args;
};

struct Rule {
  std::string name;
  std::string ruleset;
  std::vector<Premise> premises;
  std::vector<Action> actions;
};

/// A parsed rule file: relation declarations plus rules.
struct RuleProgram {
  std::vector<std::pair<std::string, std::size_t>> relations;
  std::vector<Rule> rules;
};

/// Parses the s-expression rule syntax:
///   (relation name (Sort ...))
///   (rule (premise ...) (action ...) :ruleset name :name label)
///   (rewrite lhs rhs :when (premise ...) :ruleset name)
///   (with-ruleset name form ...)
/// Bare symbols and `?x` are variables; nullary operators are written `(Nil)`.
RuleProgram parse_rules(std::string_view text);

// ---------------------------------------------------------------------------

struct RunLimits {
  int iteration_limit = 64;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct RunReport {
  bool saturated = false;
  int iterations = 0;
  bool timed_out = false;
};

class EGraph;

/// Per-node cost: the e-graph's cost table wins, then the per-operator base
/// cost, then `default_cost`. A term costs the sum over its nodes.
struct CostModel {
  double default_cost = 1.0;
  std::map<std::string, double> op_costs;
  bool use_cost_table = true;

  double node_cost(const EGraph& g, NodeId n) const;
};

/// Tree picked out of an e-graph by extraction.
struct ExtractedTerm {
  std::string op;
  Leaf leaf;
  std::vector<ExtractedTerm> kids;
  double cost = 0.0;
};

/// Congruence-closed term database with relations and rules. Single writer;
/// const members are safe to call concurrently between mutations.
class EGraph {
 public:
  EGraph() = default;

  ClassId add(ENode n);
  /// Adds a node and returns its (canonical) node id.
  NodeId add_node(ENode n);
  ClassId add_int(std::int64_t v);
  ClassId add_string(std::string v);
  ClassId add_term(Expr e);

  std::optional<ClassId> lookup(ENode n) const;
  std::optional<NodeId> lookup_node(ENode n) const;
  std::optional<ClassId> lookup_term(Expr e) const;
  std::optional<NodeId> lookup_term_node(Expr e) const;

  ClassId find(ClassId c) const;
  /// Merges two classes; the smaller id becomes the root.
  ClassId merge(ClassId a, ClassId b);
  /// Restores congruence and canonicalizes facts.
  void rebuild();

  void declare_relation(const std::string& name, std::size_t arity);
  bool has_relation(const std::string& name) const;
  /// Returns true if the fact is new. Throws on arity mismatch.
  bool assert_fact(const std::string& rel, std::vector<ClassId> args);
  bool delete_fact(const std::string& rel, std::vector<ClassId> args);
  bool has_fact(const std::string& rel, std::vector<ClassId> args) const;
  /// Facts whose components equal the given ones where specified.
  std::vector<std::vector<ClassId>> query(const std::string& rel,
                                          const std::vector<std::optional<ClassId>>& pattern) const;
  std::vector<std::vector<ClassId>> facts(const std::string& rel) const;

  void set_cost(NodeId n, double cost);
  std::optional<double> cost_override(NodeId n) const;

  void subsume(NodeId n);
  /// Throws EngineError if the term is not present.
  void subsume_term(Expr e);
  bool is_subsumed(NodeId n) const;

  void add_rule(Rule r);
  void add_program(const RuleProgram& p);
  RunReport run_ruleset(const std::string& ruleset, const RunLimits& limits = {});
  RunReport run_rulesets(const std::vector<std::string>& rulesets, const RunLimits& limits = {});

  /// Minimum-cost term of a class. Ties go to the smaller node id. Throws
  /// EngineError when every candidate is subsumed or no finite term exists.
  ExtractedTerm extract(ClassId root, const CostModel& cm = {}) const;
  Expr extract_expr(ClassId root, const CostModel& cm = {}) const;

  const ENode& node(NodeId n) const { return nodes_[n]; }
  ClassId class_of(NodeId n) const { return find(node_class_[n]); }
  std::vector<NodeId> nodes_in(ClassId c) const;
  std::size_t node_count() const;
  std::size_t class_count() const;
  /// Raw union-find parent array, for structural checks.
  const std::vector<ClassId>& parents() const { return parent_; }
  /// Counter bumped by every observable change.
  std::uint64_t version() const { return version_; }

  /// Deterministic text dump: classes with their nodes, then relations.
  std::string dump() const;

 private:
  struct CompiledPat;
  struct CompiledRule;
  class Matcher;

  ENode canonical(ENode n) const;
  void apply(const CompiledRule& r, const std::vector<ClassId>& subst);
  ClassId instantiate(const CompiledPat& p, const std::vector<ClassId>& subst);
  NodeId instantiate_node(const CompiledPat& p, const std::vector<ClassId>& subst);

  std::vector<ENode> nodes_;
  std::vector<ClassId> node_class_;
  std::vector<bool> alive_;
  mutable std::vector<ClassId> parent_;
  std::unordered_map<ENode, NodeId, ENodeHash> memo_;
  std::unordered_map<std::string, std::vector<NodeId>> by_op_;

  struct Relation {
    std::size_t arity = 0;
    std::set<std::vector<ClassId>> facts;
  };
  std::map<std::string, Relation> relations_;
  std::map<NodeId, double> cost_table_;
  std::set<NodeId> subsumed_;
  std::vector<std::shared_ptr<const CompiledRule>> rules_;
  std::uint64_t version_ = 0;
  bool dirty_ = false;
};

/// Decodes an extracted tree built by add_term back into an Expr.
Expr decode_term(const ExtractedTerm& t);

/// Rule pattern with add_term's encoding. Bound variables listed in
/// `pattern_vars` become pattern variables of the given names.
Pat term_pattern(Expr e, const std::map<Var, std::string>& pattern_vars = {});

}  // namespace mt
