#include "modelterm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mt {

Value Value::integer(std::int64_t v) {
  Value x;
  x.kind_ = Kind::Int;
  x.i_ = v;
  return x;
}

Value Value::real(double v) {
  Value x;
  x.kind_ = Kind::Float;
  x.f_ = v;
  return x;
}

Value Value::boolean(bool v) {
  Value x;
  x.kind_ = Kind::Bool;
  x.i_ = v ? 1 : 0;
  return x;
}

Value Value::tuple(std::vector<Value> items) {
  Value x;
  x.kind_ = Kind::Tuple;
  x.items_ = std::move(items);
  return x;
}

Value Value::set(std::vector<Value> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  Value x;
  x.kind_ = Kind::Set;
  x.items_ = std::move(items);
  return x;
}

Value Value::seq(std::vector<Value> items) {
  Value x;
  x.kind_ = Kind::Seq;
  x.items_ = std::move(items);
  return x;
}

Value Value::fn(std::shared_ptr<const Closure> c) {
  Value x;
  x.kind_ = Kind::Fn;
  x.fn_ = std::move(c);
  return x;
}

std::int64_t Value::as_int() const {
  if (kind_ == Kind::Int) return i_;
  if (kind_ == Kind::Float && std::floor(f_) == f_) return static_cast<std::int64_t>(f_);
  throw EvalError("expected an integer, got " + to_string());
}

double Value::as_double() const {
  if (kind_ == Kind::Int) return static_cast<double>(i_);
  if (kind_ == Kind::Float) return f_;
  throw EvalError("expected a number, got " + to_string());
}

bool Value::as_bool() const {
  if (kind_ != Kind::Bool) throw EvalError("expected a boolean, got " + to_string());
  return i_ != 0;
}

bool operator==(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) {
    if (a.kind_ == Value::Kind::Int && b.kind_ == Value::Kind::Int) return a.i_ == b.i_;
    return a.as_double() == b.as_double();
  }
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Value::Kind::Bool: return a.i_ == b.i_;
    case Value::Kind::Fn: return a.fn_ == b.fn_;
    default: return a.items_ == b.items_;
  }
}

bool operator<(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return a.as_double() < b.as_double();
  if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
  switch (a.kind_) {
    case Value::Kind::Bool: return a.i_ < b.i_;
    case Value::Kind::Fn: return a.fn_.get() < b.fn_.get();
    default:
      return std::lexicographical_compare(a.items_.begin(), a.items_.end(), b.items_.begin(),
                                          b.items_.end());
  }
}

std::string Value::to_string() const {
  std::ostringstream os;
  auto list = [&](char open, char close) {
    os << open;
    for (std::size_t i = 0; i < items_.size(); ++i) os << (i ? "," : "") << items_[i].to_string();
    os << close;
  };
  switch (kind_) {
    case Kind::Int: os << i_; break;
    case Kind::Float: os << f_; break;
    case Kind::Bool: os << (i_ ? "true" : "false"); break;
    case Kind::Tuple: list('(', ')'); break;
    case Kind::Set: list('{', '}'); break;
    case Kind::Seq: list('[', ']'); break;
    case Kind::Fn: os << "<fn>"; break;
  }
  return os.str();
}

std::vector<Value> stream_items(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Int: {
      std::vector<Value> out;
      for (std::int64_t i = 0; i < v.as_int(); ++i) out.push_back(Value::integer(i));
      return out;
    }
    case Value::Kind::Set:
    case Value::Kind::Seq:
      return v.items();
    default:
      throw EvalError("value is not iterable: " + v.to_string());
  }
}

void bind_pattern(const Pattern& p, const Value& v, BoundEnv& bound) {
  if (!p.is_tuple()) {
    bound[p.var()] = v;
    return;
  }
  if (v.kind() != Value::Kind::Tuple || v.items().size() != p.parts().size())
    throw EvalError("cannot destructure " + v.to_string() + " against a " +
                    std::to_string(p.parts().size()) + "-tuple pattern");
  for (std::size_t i = 0; i < p.parts().size(); ++i) bind_pattern(p.parts()[i], v.items()[i], bound);
}

namespace {

class Evaluator {
 public:
  explicit Evaluator(const Env& env) : env_(env) {}

  Value eval(Expr e, const BoundEnv& b) {
    switch (e.kind()) {
      case ExprKind::FVar: {
        auto it = env_.find(e.symbol());
        if (it == env_.end()) throw EvalError("unbound symbol " + e.symbol());
        return it->second;
      }
      case ExprKind::BVar: {
        auto it = b.find(e.var());
        if (it == b.end()) throw EvalError("unbound variable " + to_sexpr(e));
        return it->second;
      }
      case ExprKind::IntLit: return Value::integer(e.int_value());
      case ExprKind::FloatLit: return Value::real(e.float_value());
      case ExprKind::BoolLit: return Value::boolean(e.bool_value());
      case ExprKind::Lam:
        return Value::fn(std::make_shared<Closure>(Closure{e.pattern(), e.child(0), b}));
      case ExprKind::App: {
        Value fn = eval(e.child(0), b);
        if (fn.kind() != Value::Kind::Fn) throw EvalError("applying a non-function");
        std::vector<Value> args;
        for (auto a : e.children().subspan(1)) args.push_back(eval(a, b));
        Value arg = args.size() == 1 ? args[0] : Value::tuple(std::move(args));
        return call(fn, arg);
      }
      case ExprKind::Tuple: {
        std::vector<Value> items;
        for (auto c : e.children()) items.push_back(eval(c, b));
        return Value::tuple(std::move(items));
      }
      case ExprKind::Prim: return prim(e, b);
      case ExprKind::Sum: {
        Value acc = Value::integer(0);
        for (const auto& v : stream_items(eval(e.child(0), b))) acc = arith(PrimOp::Add, acc, v);
        return acc;
      }
      case ExprKind::Map: {
        Value fn = eval(e.child(0), b);
        std::vector<Value> out;
        for (const auto& v : stream_items(eval(e.child(1), b))) out.push_back(call(fn, v));
        return Value::seq(std::move(out));
      }
      case ExprKind::FlatMap: {
        Value fn = eval(e.child(0), b);
        std::vector<Value> out;
        for (const auto& v : stream_items(eval(e.child(1), b)))
          for (auto& w : stream_items(call(fn, v))) out.push_back(std::move(w));
        return Value::seq(std::move(out));
      }
      case ExprKind::Filter: {
        Value fn = eval(e.child(0), b);
        std::vector<Value> out;
        for (const auto& v : stream_items(eval(e.child(1), b)))
          if (call(fn, v).as_bool()) out.push_back(v);
        return Value::seq(std::move(out));
      }
      case ExprKind::Index: {
        Value base = eval(e.child(0), b);
        for (auto ix : e.children().subspan(1)) {
          Value i = eval(ix, b);
          if (base.kind() != Value::Kind::Seq && base.kind() != Value::Kind::Tuple)
            throw EvalError("indexing a non-array value " + base.to_string());
          auto k = i.as_int();
          if (k < 0 || k >= static_cast<std::int64_t>(base.items().size()))
            throw EvalError("index " + std::to_string(k) + " out of range");
          Value next = base.items()[static_cast<std::size_t>(k)];
          base = std::move(next);
        }
        return base;
      }
      case ExprKind::Range: return Value::seq(stream_items(eval(e.child(0), b)));
      case ExprKind::Compr: {
        std::vector<Value> out;
        for_each_solution(e.children().subspan(1), env_, b,
                          [&](const BoundEnv& inner) { out.push_back(eval(e.child(0), inner)); });
        return Value::seq(std::move(out));
      }
      case ExprKind::Mem:
      case ExprKind::If:
      case ExprKind::Let:
        throw EvalError("a condition is not a value: " + to_sexpr(e));
    }
    throw EvalError("unknown expression");
  }

  Value call(const Value& fn, const Value& arg) {
    if (fn.kind() != Value::Kind::Fn) throw EvalError("applying a non-function");
    const Closure& c = fn.closure();
    BoundEnv inner = c.captured;
    bind_pattern(c.param, arg, inner);
    return eval(c.body, inner);
  }

 private:
  static Value arith(PrimOp op, const Value& a, const Value& b) {
    if (!a.is_number() || !b.is_number())
      throw EvalError("arithmetic on non-numbers " + a.to_string() + ", " + b.to_string());
    bool ints = a.kind() == Value::Kind::Int && b.kind() == Value::Kind::Int;
    switch (op) {
      case PrimOp::Add:
        return ints ? Value::integer(a.as_int() + b.as_int()) : Value::real(a.as_double() + b.as_double());
      case PrimOp::Sub:
        return ints ? Value::integer(a.as_int() - b.as_int()) : Value::real(a.as_double() - b.as_double());
      case PrimOp::Mul:
        return ints ? Value::integer(a.as_int() * b.as_int()) : Value::real(a.as_double() * b.as_double());
      case PrimOp::Div: {
        if (b.as_double() == 0.0) throw EvalError("division by zero");
        if (ints && a.as_int() % b.as_int() == 0) return Value::integer(a.as_int() / b.as_int());
        return Value::real(a.as_double() / b.as_double());
      }
      case PrimOp::Mod: {
        if (!ints) throw EvalError("mod needs integer operands");
        auto d = b.as_int();
        if (d == 0) throw EvalError("division by zero");
        auto r = a.as_int() % d;
        if (r != 0 && ((r < 0) != (d < 0))) r += d;  // floored, sign follows divisor
        return Value::integer(r);
      }
      default:
        throw EvalError("not an arithmetic operator");
    }
  }

  Value prim(Expr e, const BoundEnv& b) {
    PrimOp op = e.op();
    switch (op) {
      case PrimOp::And: return Value::boolean(eval(e.child(0), b).as_bool() && eval(e.child(1), b).as_bool());
      case PrimOp::Or: return Value::boolean(eval(e.child(0), b).as_bool() || eval(e.child(1), b).as_bool());
      case PrimOp::Not: return Value::boolean(!eval(e.child(0), b).as_bool());
      case PrimOp::Count: {
        Value v = eval(e.child(0), b);
        if (v.kind() == Value::Kind::Int) return v;
        return Value::integer(static_cast<std::int64_t>(stream_items(v).size()));
      }
      default: break;
    }
    Value x = eval(e.child(0), b);
    Value y = eval(e.child(1), b);
    switch (op) {
      case PrimOp::Eq: return Value::boolean(x == y);
      case PrimOp::Neq: return Value::boolean(!(x == y));
      case PrimOp::Lt: return Value::boolean(x < y);
      case PrimOp::Le: return Value::boolean(x < y || x == y);
      case PrimOp::TupleIndex: {
        if (x.kind() != Value::Kind::Tuple) throw EvalError("tuple-index on a non-tuple");
        auto k = y.as_int();
        if (k < 0 || k >= static_cast<std::int64_t>(x.items().size())) throw EvalError("tuple index out of range");
        return x.items()[static_cast<std::size_t>(k)];
      }
      default: return arith(op, x, y);
    }
  }

  const Env& env_;
};

void solve(std::span<const Expr> conds, Evaluator& ev, const BoundEnv& b,
           const std::function<void(const BoundEnv&)>& emit) {
  if (conds.empty()) {
    emit(b);
    return;
  }
  Expr c = conds.front();
  auto rest = conds.subspan(1);
  switch (c.kind()) {
    case ExprKind::Mem: {
      auto p = as_pattern(c.child(0));
      if (!p) throw EvalError("membership target is not a pattern: " + to_sexpr(c));
      for (const auto& v : stream_items(ev.eval(c.child(1), b))) {
        BoundEnv next = b;
        bind_pattern(*p, v, next);
        solve(rest, ev, next, emit);
      }
      return;
    }
    case ExprKind::If:
      if (ev.eval(c.child(0), b).as_bool()) solve(rest, ev, b, emit);
      return;
    case ExprKind::Let: {
      auto p = as_pattern(c.child(0));
      if (!p) throw EvalError("let target is not a pattern: " + to_sexpr(c));
      Value v = ev.eval(c.child(1), b);
      // An already-bound target turns the binding into an equality test.
      bool all_bound = true;
      for (const auto& var : p->vars()) all_bound = all_bound && b.contains(var);
      if (all_bound) {
        if (ev.eval(c.child(0), b) == v) solve(rest, ev, b, emit);
        return;
      }
      BoundEnv next = b;
      bind_pattern(*p, v, next);
      solve(rest, ev, next, emit);
      return;
    }
    default:
      throw EvalError("not a condition: " + to_sexpr(c));
  }
}

}  // namespace

Value evaluate(Expr e, const Env& env) { return evaluate(e, env, {}); }

Value evaluate(Expr e, const Env& env, const BoundEnv& bound) {
  Evaluator ev(env);
  return ev.eval(e, bound);
}

void for_each_solution(std::span<const Expr> conditions, const Env& env, const BoundEnv& bound,
                       const std::function<void(const BoundEnv&)>& emit) {
  Evaluator ev(env);
  solve(conditions, ev, bound, emit);
}

}  // namespace mt
