#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "modelterm/ast.hpp"

namespace mt {

class EvalError : public Error {
 public:
  using Error::Error;
};

struct Closure;

/// Concrete data value. Sets are kept sorted and duplicate-free; sequences
/// keep insertion order.
class Value {
 public:
  enum class Kind { Int, Float, Bool, Tuple, Set, Seq, Fn };

  static Value integer(std::int64_t v);
  static Value real(double v);
  static Value boolean(bool v);
  static Value tuple(std::vector<Value> items);
  static Value set(std::vector<Value> items);
  static Value seq(std::vector<Value> items);
  static Value fn(std::shared_ptr<const Closure> c);

  Kind kind() const { return kind_; }
  bool is_number() const { return kind_ == Kind::Int || kind_ == Kind::Float; }
  std::int64_t as_int() const;
  double as_double() const;
  bool as_bool() const;
  const std::vector<Value>& items() const { return items_; }
  const Closure& closure() const { return *fn_; }

  friend bool operator==(const Value& a, const Value& b);
  friend bool operator<(const Value& a, const Value& b);

  std::string to_string() const;

 private:
  Kind kind_ = Kind::Int;
  std::int64_t i_ = 0;
  double f_ = 0.0;
  std::vector<Value> items_;
  std::shared_ptr<const Closure> fn_;
};

using Env = std::map<std::string, Value>;
using BoundEnv = std::map<Var, Value>;

struct Closure {
  Pattern param;
  Expr body;
  BoundEnv captured;
};

/// Call-by-value evaluation. Integers iterate as 0..n-1 when used as a
/// stream; Sum adds the elements of its stream starting from 0.
Value evaluate(Expr e, const Env& env);
Value evaluate(Expr e, const Env& env, const BoundEnv& bound);

/// Elements a value yields when iterated as a stream.
std::vector<Value> stream_items(const Value& v);

/// Binds the variables of `p` against `v`, throwing EvalError on shape mismatch.
void bind_pattern(const Pattern& p, const Value& v, BoundEnv& bound);

/// Runs the condition list of a comprehension left to right and calls
/// `emit` with the environment of every satisfying assignment.
void for_each_solution(std::span<const Expr> conditions, const Env& env, const BoundEnv& bound,
                       const std::function<void(const BoundEnv&)>& emit);

}  // namespace mt
