#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "modelterm/ast.hpp"
#include "modelterm/surface.hpp"

namespace mt {

/// Head expression over an ordered list of Mem / If / Let conditions.
struct Comprehension {
  Expr head;
  std::vector<Expr> conditions;

  Expr to_expr() const { return compr(head, conditions); }
  static Comprehension from_expr(Expr e);

  friend bool operator==(const Comprehension&, const Comprehension&) = default;
};

/// Rebuilds comprehension syntax from a Map/FlatMap/Filter pipeline.
/// Throws ShapeError for terms that cannot denote a stream.
Comprehension ensugar_expr(Expr e);

/// Conditions stating that the pattern expression `p` ranges over `e`.
std::vector<Expr> ensugar_membership(Expr p, Expr e);

/// Renumbers the offsets of variables introduced by conditions: the last
/// introducing condition gets 0, the one before it 1, and so on.
Comprehension assign_offsets(const Comprehension& c);

/// Variables introduced by Mem targets and Let left-hand sides, in order of
/// first introduction.
std::vector<Var> introduced_vars(std::span<const Expr> conditions);

struct OptimizeOptions {
  int iteration_limit = 64;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct OptimizeOutcome {
  Comprehension result;
  /// True when a stage did not saturate and the input was returned as is.
  bool fell_back = false;
};

/// Removes temporary rebindings by equality saturation and extraction.
OptimizeOutcome optimize_comprehension(const Comprehension& c, const OptimizeOptions& o = {});

/// Extraction cost of a comprehension under the optimizer's cost model.
double comprehension_cost(const Comprehension& c);

struct EnsugarOptions {
  bool optimize = true;
  OptimizeOptions limits;
};

struct EnsugarStats {
  int comprehensions = 0;
  int fallbacks = 0;
};

/// Replaces every Sum over a raw stream with a Sum over a comprehension,
/// innermost first.
Expr ensugar_sums(Expr e, const EnsugarOptions& o = {}, EnsugarStats* stats = nullptr);

struct EnsugaredConstraint {
  std::string name;
  /// Domain conditions; empty for unparametrized constraints.
  std::vector<Expr> conditions;
  Expr lhs;
  Cmp cmp = Cmp::Eq;
  Expr rhs;

  std::vector<Var> bound() const { return introduced_vars(conditions); }
};

struct EnsugaredModel {
  Model model;
  Expr objective;
  std::vector<EnsugaredConstraint> constraints;
  EnsugarStats stats;
};

EnsugaredModel ensugar_model(const Model& m, const EnsugarOptions& o = {});

}  // namespace mt
