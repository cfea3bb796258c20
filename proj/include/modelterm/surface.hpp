#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modelterm/ast.hpp"

namespace mt {

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int col);
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

// ---------------------------------------------------------------------------
// Surface syntax tree (names unresolved, comprehensions intact)

struct SExpr;
using SExprPtr = std::shared_ptr<const SExpr>;

struct SPattern {
  std::vector<std::string> names;  // one name, or the components of a flat tuple
  bool is_tuple() const { return names.size() > 1; }
};

struct SClause {
  enum class Kind { For, If };
  Kind kind = Kind::For;
  SPattern pattern;  // For only
  SExprPtr expr;     // source for For, guard for If
};

struct SurfaceComprehension {
  SExprPtr head;
  std::vector<SClause> clauses;
};

struct SExpr {
  enum class Kind { Ident, Int, Float, Bool, Tuple, Prim, Index, Sum, Compr };
  Kind kind = Kind::Int;
  std::string name;
  std::int64_t ival = 0;
  double fval = 0.0;
  PrimOp op = PrimOp::Add;
  std::vector<SExprPtr> args;  // Tuple items, Prim operands, Index [base, idx...], Sum [stream]
  std::shared_ptr<const SurfaceComprehension> compr;  // Compr only
  int line = 0;
  int col = 0;
};

enum class Sense { Minimize, Maximize };
enum class DeclKind { BinaryVar, ContinuousVar, Placeholder, CategorySet };
enum class Cmp { Eq, Le, Ge };

template <class E>
struct BasicDeclaration {
  std::string symbol;
  DeclKind kind = DeclKind::Placeholder;
  std::vector<E> dims;
  std::optional<std::pair<E, E>> bounds;
  std::string description;
  int line = 0;
  int col = 0;
};

struct SurfaceConstraint {
  std::string name;
  std::optional<SPattern> index;
  SExprPtr domain;
  SExprPtr lhs;
  Cmp cmp = Cmp::Eq;
  SExprPtr rhs;
};

struct SurfaceModel {
  std::string name;
  Sense sense = Sense::Minimize;
  std::vector<BasicDeclaration<SExprPtr>> declarations;
  SExprPtr objective;
  std::vector<SurfaceConstraint> constraints;
};

/// Parses the textual model format. Fails with a position-annotated
/// ParseError on syntax errors, duplicate declarations and unbound symbols.
SurfaceModel parse_model(std::string_view text);

// ---------------------------------------------------------------------------
// Core model

using Declaration = BasicDeclaration<Expr>;

/// A constraint family. Unparametrized constraints have no index patterns
/// and a null domain; otherwise the domain is a stream over the pattern.
struct Constraint {
  std::string name;
  std::vector<Pattern> index_patterns;
  Expr domain;
  Expr lhs;
  Cmp cmp = Cmp::Eq;
  Expr rhs;

  bool parametrized() const { return !index_patterns.empty(); }
};

struct Model {
  std::string name;
  Sense sense = Sense::Minimize;
  std::vector<Declaration> declarations;
  Expr objective;
  std::vector<Constraint> constraints;

  const Declaration* find(const std::string& symbol) const;
  /// Symbols declared with `set`; everything else iterates as a natural number.
  std::set<std::string> set_symbols() const;
};

using Scope = std::vector<std::pair<std::string, Var>>;

/// Desugars a comprehension into a Map/FlatMap/Filter pipeline. Names found
/// in `scope` become bound variables, all others free symbols.
Expr desugar(const SurfaceComprehension& c, const Scope& scope = {});
Expr desugar_expr(const SExpr& e, const Scope& scope = {});
Model desugar_model(const SurfaceModel& m);

/// parse_model followed by desugar_model.
Model load_model(std::string_view text);
Model load_model_file(const std::string& path);

}  // namespace mt
