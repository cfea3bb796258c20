#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a pattern and its replacement disagree on tuple shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A named bound variable. The nonce makes every generated variable unique,
/// so substitution never captures; the offset only feeds the extraction cost.
struct Var {
  std::string name;
  std::uint32_t offset = 0;
  std::uint64_t nonce = 0;

  friend bool operator==(const Var&, const Var&) = default;
  friend auto operator<=>(const Var&, const Var&) = default;
};

/// Returns a variable carrying the next value of the process-wide nonce
/// counter. Thread-safe.
Var fresh_var(std::string name, std::uint32_t offset = 0);

/// Same name as `v`, fresh nonce, offset reset to 0.
Var refresh(const Var& v);

class Pattern {
 public:
  static Pattern var(Var v);
  /// Throws ShapeError for fewer than two components.
  static Pattern tuple(std::vector<Pattern> parts);

  bool is_tuple() const { return !var_.has_value(); }
  const Var& var() const { return *var_; }
  const std::vector<Pattern>& parts() const { return parts_; }

  /// Variables in left-to-right order.
  std::vector<Var> vars() const;
  /// Copy of this pattern with each variable replaced by a fresh one.
  Pattern refreshed() const;

  std::size_t hash() const;
  friend bool operator==(const Pattern&, const Pattern&) = default;

 private:
  Pattern() = default;
  std::optional<Var> var_;
  std::vector<Pattern> parts_;
};

enum class PrimOp {
  Add, Sub, Mul, Div, Mod,
  Eq, Neq, Lt, Le,
  And, Or, Not,
  Count, TupleIndex,
};

int arity(PrimOp op);
std::string_view op_name(PrimOp op);
std::optional<PrimOp> op_from_name(std::string_view name);
bool is_comparison(PrimOp op);

enum class ExprKind {
  FVar, BVar, Lam, App,
  IntLit, FloatLit, BoolLit,
  Tuple, Prim,
  Sum, Map, FlatMap, Filter,
  Index, Range,
  // Comprehension form produced by ensugaring.
  Mem, If, Let, Compr,
};

std::string_view kind_name(ExprKind k);

struct ExprNode;

/// Handle to an immutable, hashconsed term. Structurally identical terms
/// share one node, so equality is pointer equality.
///
/// Child layout by kind:
///   Lam:      [body]                 (pattern held separately)
///   App:      [fn, args...]
///   Map/FlatMap/Filter: [fn, stream]
///   Index:    [base, indices...]
///   Mem:      [bound, source]
///   Let:      [lhs, rhs]
///   Compr:    [head, conditions...]
class Expr {
 public:
  Expr() = default;

  ExprKind kind() const;
  std::uint64_t id() const;

  const std::string& symbol() const;
  const Var& var() const;
  const Pattern& pattern() const;
  std::int64_t int_value() const;
  double float_value() const;
  bool bool_value() const;
  PrimOp op() const;
  std::span<const Expr> children() const;
  const Expr& child(std::size_t i) const { return children()[i]; }

  bool is(ExprKind k) const { return node_ != nullptr && kind() == k; }
  explicit operator bool() const { return node_ != nullptr; }
  friend bool operator==(Expr a, Expr b) { return a.node_ == b.node_; }
  friend bool operator<(Expr a, Expr b) { return a.id() < b.id(); }

 private:
  friend Expr intern(ExprNode&& n);
  explicit Expr(const ExprNode* n) : node_(n) {}
  const ExprNode* node_ = nullptr;
};

struct ExprHash {
  std::size_t operator()(Expr e) const { return std::hash<std::uint64_t>{}(e.id()); }
};

// Builders.
Expr fvar(std::string name);
Expr bvar(Var v);
Expr lam(Pattern p, Expr body);
Expr app(Expr fn, std::vector<Expr> args);
Expr int_lit(std::int64_t v);
Expr float_lit(double v);
Expr bool_lit(bool v);
Expr tuple(std::vector<Expr> items);
Expr prim(PrimOp op, std::vector<Expr> args);
Expr sum(Expr stream);
Expr map(Expr fn, Expr stream);
Expr flat_map(Expr fn, Expr stream);
Expr filter(Expr pred, Expr stream);
Expr index(Expr base, std::vector<Expr> indices);
Expr range(Expr source);
Expr mem(Expr bound, Expr source);
Expr guard(Expr cond);
Expr let(Expr lhs, Expr rhs);
Expr compr(Expr head, std::vector<Expr> conditions);

inline Expr add(Expr a, Expr b) { return prim(PrimOp::Add, {a, b}); }
inline Expr sub(Expr a, Expr b) { return prim(PrimOp::Sub, {a, b}); }
inline Expr mul(Expr a, Expr b) { return prim(PrimOp::Mul, {a, b}); }
inline Expr mod(Expr a, Expr b) { return prim(PrimOp::Mod, {a, b}); }
inline Expr eq(Expr a, Expr b) { return prim(PrimOp::Eq, {a, b}); }
inline Expr lt(Expr a, Expr b) { return prim(PrimOp::Lt, {a, b}); }
inline Expr le(Expr a, Expr b) { return prim(PrimOp::Le, {a, b}); }

/// BVar for a single variable, Tuple of BVars for a tuple pattern.
Expr pattern_expr(const Pattern& p);
/// Inverse of pattern_expr; nullopt unless `e` is a BVar or nested tuple of them.
std::optional<Pattern> as_pattern(Expr e);

using Subst = std::map<Var, Expr>;
Expr substitute(Expr e, const Subst& s);

/// Same node kind and payload as `e`, with new children.
Expr with_children(Expr e, std::vector<Expr> kids);

/// Replaces the variables bound by `p` inside `body` with `replacements`,
/// matched against the top level of `p`. Nested tuple components must be
/// matched by Tuple expressions of the same arity.
Expr open(Expr body, const Pattern& p, std::span<const Expr> replacements);
Expr open(Expr body, const Pattern& p, Expr replacement);

std::set<std::string> free_vars(Expr e);
/// Every Var occurring in `e` (bound positions included).
std::set<Var> vars_of(Expr e);

/// Sources that iterate as 0..n-1 rather than as a collection: literals,
/// arithmetic, count(), Range, and free symbols not listed in `set_symbols`.
bool is_natural_source(Expr e, const std::set<std::string>& set_symbols);

/// Term node count.
std::size_t term_size(Expr e);

/// Compact s-expression form with `name_nonce` for bound variables.
std::string to_sexpr(Expr e);

}  // namespace mt
