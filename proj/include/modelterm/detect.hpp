#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "modelterm/ast.hpp"
#include "modelterm/engine.hpp"
#include "modelterm/eval.hpp"
#include "modelterm/surface.hpp"

namespace mt {

/// A representative constant standing for every index a constraint or sum
/// ranges over; its domain conditions are asserted as plain facts.
struct HenkinBinding {
  Var var;
  std::string source;
  std::vector<Expr> conditions;
};

struct Detection {
  std::string kind;
  /// Membership and guard conditions of the detected group.
  std::vector<Expr> conditions;
  /// Domain conditions of representatives that occur in `variable` but are
  /// not bound by `conditions`.
  std::vector<Expr> context;
  /// Indexed variable family, e.g. x[i].
  Expr variable;
};

struct PremiseStats {
  std::size_t before = 0;
  std::size_t after = 0;
};

struct DetectOptions {
  bool split = true;
  int iteration_limit = 64;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  /// Detection rule library; empty means the built-in SOS1 rules.
  std::string rules;
};

struct DetectionReport {
  std::vector<Detection> detections;
  double encode_ms = 0;
  double saturate_ms = 0;
  PremiseStats premises;
  bool saturated = false;
  bool timed_out = false;
  std::vector<std::string> warnings;
};

/// The SOS1 rule library shipped with the tool.
const std::string& default_detection_rules();

/// Conditions stating that the pattern expression `target` ranges over
/// `domain`, with bindings substituted away.
std::vector<Expr> split_member_premise(Expr target, Expr domain);

/// Encoding state shared between encode_model and run_detection.
class Detector {
 public:
  explicit Detector(const DetectOptions& o = {});

  /// Asserts facts and registers conditional rules for every constraint.
  void encode_model(const Model& m);
  RunReport saturate();
  std::vector<Detection> detections() const;

  EGraph& graph() { return g_; }
  const EGraph& graph() const { return g_; }
  const std::vector<HenkinBinding>& bindings() const { return bindings_; }
  const PremiseStats& premises() const { return premises_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct Fact {
    std::string rel;
    std::vector<Expr> args;
  };

  void encode_constraint(const Constraint& c);
  Expr lower_sums(Expr e, const std::string& source, std::vector<Fact>& facts);
  void condition_facts(Expr cond, std::vector<Fact>& out) const;
  void guard_facts(Expr g, std::vector<Fact>& out) const;
  void assert_facts(const std::vector<Fact>& facts);

  DetectOptions opts_;
  EGraph g_;
  RuleProgram program_;
  std::set<std::string> set_symbols_;
  std::vector<HenkinBinding> bindings_;
  PremiseStats premises_;
  std::vector<std::string> warnings_;
};

DetectionReport run_detection(const Model& m, const DetectOptions& o = {});

/// S-expression of a condition, e.g. (< i_42 N).
std::string condition_sexpr(Expr cond, const std::set<std::string>& set_symbols = {});

/// Nonce-independent key for comparing detections across runs.
std::string canonical_key(const Detection& d);

struct ConcreteVar {
  std::string family;
  std::vector<Value> index;
  std::string to_string() const;
  friend bool operator==(const ConcreteVar&, const ConcreteVar&) = default;
};

/// Instantiates a detection over concrete data: one group per assignment of
/// its context, each listing the variables its conditions select. Empty
/// groups are dropped. Throws EvalError for an unbounded representative.
std::vector<std::vector<ConcreteVar>> interpret_detection(const Detection& d, const Env& data);

}  // namespace mt
