#include "modelterm/surface.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace mt {

ParseError::ParseError(const std::string& msg, int line, int col)
    : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg), line_(line), col_(col) {}

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Int, Float, String, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int col = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::Int;
      if (j + 1 < src.size() && src[j] == '.' && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        t.kind = Tok::Float;
      }
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '"') {
      std::size_t j = i + 1;
      std::string s;
      while (j < src.size() && src[j] != '"') {
        if (src[j] == '\\' && j + 1 < src.size()) ++j;
        s.push_back(src[j]);
        ++j;
      }
      if (j >= src.size()) throw ParseError("unterminated string", line, col);
      t.kind = Tok::String;
      t.text = std::move(s);
      advance(j + 1 - i);
    } else {
      static const char* two[] = {"==", "!=", "<=", ">="};
      t.kind = Tok::Punct;
      for (const char* op : two) {
        if (src.substr(i, 2) == op) t.text = op;
      }
      if (t.text.empty()) {
        if (std::string_view("()[],;:+-*/%<>").find(c) == std::string_view::npos)
          throw ParseError(std::string("unexpected character '") + c + "'", line, col);
        t.text = std::string(1, c);
      }
      advance(t.text.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> kw = {
      "problem", "min", "max", "set", "binvar", "var", "param", "in", "objective", "constraint",
      "forall", "for", "if", "sum", "count", "mod", "and", "or", "not", "true", "false", "inf"};
  return kw;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(lex(src)) {}

  SurfaceModel model() {
    SurfaceModel m;
    expect_kw("problem");
    m.name = expect(Tok::String, "problem name").text;
    if (accept_kw("min")) {
      m.sense = Sense::Minimize;
    } else if (accept_kw("max")) {
      m.sense = Sense::Maximize;
    } else {
      fail("expected 'min' or 'max'");
    }
    expect_punct(";");
    while (peek_kw("set") || peek_kw("binvar") || peek_kw("var") || peek_kw("param"))
      m.declarations.push_back(declaration());
    expect_kw("objective");
    accept_punct(":");
    m.objective = expr();
    expect_punct(";");
    while (peek_kw("constraint")) m.constraints.push_back(constraint());
    if (cur().kind != Tok::End) fail("expected 'constraint' or end of input");
    return m;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = cur();
    std::string at = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(msg + " at " + at, t.line, t.col);
  }

  bool peek_kw(std::string_view kw) const { return cur().kind == Tok::Ident && cur().text == kw; }
  bool peek_punct(std::string_view p) const { return cur().kind == Tok::Punct && cur().text == p; }

  bool accept_kw(std::string_view kw) {
    if (!peek_kw(kw)) return false;
    ++pos_;
    return true;
  }
  bool accept_punct(std::string_view p) {
    if (!peek_punct(p)) return false;
    ++pos_;
    return true;
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail("expected '" + std::string(kw) + "'");
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) fail("expected '" + std::string(p) + "'");
  }
  Token expect(Tok kind, const std::string& what) {
    if (cur().kind != kind) fail("expected " + what);
    return toks_[pos_++];
  }
  Token ident(const std::string& what) {
    if (cur().kind != Tok::Ident || keywords().contains(cur().text)) fail("expected " + what);
    return toks_[pos_++];
  }

  BasicDeclaration<SExprPtr> declaration() {
    BasicDeclaration<SExprPtr> d;
    if (accept_kw("set")) {
      d.kind = DeclKind::CategorySet;
    } else if (accept_kw("binvar")) {
      d.kind = DeclKind::BinaryVar;
    } else if (accept_kw("var")) {
      d.kind = DeclKind::ContinuousVar;
    } else {
      expect_kw("param");
      d.kind = DeclKind::Placeholder;
    }
    Token name = ident("a symbol name");
    d.symbol = name.text;
    d.line = name.line;
    d.col = name.col;
    if (accept_punct("[")) {
      d.dims.push_back(expr());
      while (accept_punct(",")) d.dims.push_back(expr());
      expect_punct("]");
    }
    if (accept_kw("in")) {
      expect_punct("[");
      auto lo = expr();
      expect_punct(",");
      auto hi = expr();
      expect_punct("]");
      d.bounds = std::make_pair(lo, hi);
    }
    if (accept_punct(":")) d.description = expect(Tok::String, "a description string").text;
    expect_punct(";");
    return d;
  }

  SurfaceConstraint constraint() {
    SurfaceConstraint c;
    expect_kw("constraint");
    c.name = expect(Tok::String, "constraint name").text;
    if (accept_kw("forall")) {
      expect_punct("(");
      c.index = pattern();
      expect_kw("in");
      c.domain = expr();
      expect_punct(")");
    }
    expect_punct(":");
    c.lhs = arith();
    if (accept_punct("==")) {
      c.cmp = Cmp::Eq;
    } else if (accept_punct("<=")) {
      c.cmp = Cmp::Le;
    } else if (accept_punct(">=")) {
      c.cmp = Cmp::Ge;
    } else {
      fail("expected '==', '<=' or '>='");
    }
    c.rhs = arith();
    expect_punct(";");
    return c;
  }

  SPattern pattern() {
    SPattern p;
    if (accept_punct("(")) {
      p.names.push_back(ident("a pattern variable").text);
      expect_punct(",");
      p.names.push_back(ident("a pattern variable").text);
      while (accept_punct(",")) p.names.push_back(ident("a pattern variable").text);
      expect_punct(")");
      return p;
    }
    p.names.push_back(ident("a pattern variable").text);
    return p;
  }

  std::shared_ptr<SExpr> node(SExpr::Kind k, const Token& at) {
    auto n = std::make_shared<SExpr>();
    n->kind = k;
    n->line = at.line;
    n->col = at.col;
    return n;
  }

  SExprPtr binop(PrimOp op, SExprPtr a, SExprPtr b, const Token& at) {
    auto n = node(SExpr::Kind::Prim, at);
    n->op = op;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  SExprPtr expr() { return disjunction(); }

  SExprPtr disjunction() {
    auto lhs = conjunction();
    while (peek_kw("or")) {
      Token at = toks_[pos_++];
      lhs = binop(PrimOp::Or, lhs, conjunction(), at);
    }
    return lhs;
  }

  SExprPtr conjunction() {
    auto lhs = negation();
    while (peek_kw("and")) {
      Token at = toks_[pos_++];
      lhs = binop(PrimOp::And, lhs, negation(), at);
    }
    return lhs;
  }

  SExprPtr negation() {
    if (peek_kw("not")) {
      Token at = toks_[pos_++];
      auto n = node(SExpr::Kind::Prim, at);
      n->op = PrimOp::Not;
      n->args = {negation()};
      return n;
    }
    return comparison();
  }

  SExprPtr comparison() {
    auto lhs = arith();
    if (cur().kind != Tok::Punct) return lhs;
    Token at = cur();
    const std::string& t = at.text;
    if (t == "==") {
      ++pos_;
      return binop(PrimOp::Eq, lhs, arith(), at);
    }
    if (t == "!=") {
      ++pos_;
      return binop(PrimOp::Neq, lhs, arith(), at);
    }
    if (t == "<") {
      ++pos_;
      return binop(PrimOp::Lt, lhs, arith(), at);
    }
    if (t == "<=") {
      ++pos_;
      return binop(PrimOp::Le, lhs, arith(), at);
    }
    if (t == ">") {
      ++pos_;
      return binop(PrimOp::Lt, arith(), lhs, at);
    }
    if (t == ">=") {
      ++pos_;
      return binop(PrimOp::Le, arith(), lhs, at);
    }
    return lhs;
  }

  SExprPtr arith() {
    auto lhs = term();
    while (peek_punct("+") || peek_punct("-")) {
      Token at = toks_[pos_++];
      lhs = binop(at.text == "+" ? PrimOp::Add : PrimOp::Sub, lhs, term(), at);
    }
    return lhs;
  }

  SExprPtr term() {
    auto lhs = unary();
    while (peek_punct("*") || peek_punct("/") || peek_punct("%") || peek_kw("mod")) {
      Token at = toks_[pos_++];
      PrimOp op = at.text == "*" ? PrimOp::Mul : at.text == "/" ? PrimOp::Div : PrimOp::Mod;
      lhs = binop(op, lhs, unary(), at);
    }
    return lhs;
  }

  SExprPtr unary() {
    if (peek_punct("-")) {
      Token at = toks_[pos_++];
      auto zero = node(SExpr::Kind::Int, at);
      return binop(PrimOp::Sub, zero, unary(), at);
    }
    return postfix();
  }

  SExprPtr postfix() {
    auto base = primary();
    while (peek_punct("[")) {
      Token at = toks_[pos_++];
      auto n = node(SExpr::Kind::Index, at);
      n->args.push_back(base);
      n->args.push_back(expr());
      while (accept_punct(",")) n->args.push_back(expr());
      expect_punct("]");
      base = n;
    }
    return base;
  }

  std::shared_ptr<SurfaceComprehension> clauses(SExprPtr head) {
    auto c = std::make_shared<SurfaceComprehension>();
    c->head = std::move(head);
    while (peek_kw("for") || peek_kw("if")) {
      SClause cl;
      if (accept_kw("for")) {
        cl.kind = SClause::Kind::For;
        cl.pattern = pattern();
        expect_kw("in");
        cl.expr = expr();
      } else {
        expect_kw("if");
        if (c->clauses.empty()) fail("a comprehension must start with 'for'");
        cl.kind = SClause::Kind::If;
        cl.expr = expr();
      }
      c->clauses.push_back(std::move(cl));
    }
    return c;
  }

  SExprPtr primary() {
    Token at = cur();
    if (at.kind == Tok::Int) {
      ++pos_;
      auto n = node(SExpr::Kind::Int, at);
      n->ival = std::stoll(at.text);
      return n;
    }
    if (at.kind == Tok::Float) {
      ++pos_;
      auto n = node(SExpr::Kind::Float, at);
      n->fval = std::stod(at.text);
      return n;
    }
    if (accept_kw("true") || accept_kw("false")) {
      auto n = node(SExpr::Kind::Bool, at);
      n->ival = at.text == "true";
      return n;
    }
    if (accept_kw("inf")) {
      auto n = node(SExpr::Kind::Float, at);
      n->fval = std::numeric_limits<double>::infinity();
      return n;
    }
    if (accept_kw("sum")) {
      expect_punct("(");
      auto inner = expr();
      auto n = node(SExpr::Kind::Sum, at);
      if (peek_kw("for")) {
        auto c = node(SExpr::Kind::Compr, at);
        c->compr = clauses(inner);
        inner = c;
      }
      n->args = {inner};
      expect_punct(")");
      return n;
    }
    if (accept_kw("count")) {
      expect_punct("(");
      auto n = node(SExpr::Kind::Prim, at);
      n->op = PrimOp::Count;
      n->args = {expr()};
      expect_punct(")");
      return n;
    }
    if (accept_punct("[")) {
      auto head = expr();
      if (!peek_kw("for")) fail("expected 'for' in comprehension");
      auto n = node(SExpr::Kind::Compr, at);
      n->compr = clauses(head);
      expect_punct("]");
      return n;
    }
    if (accept_punct("(")) {
      auto first = expr();
      if (!peek_punct(",")) {
        expect_punct(")");
        return first;
      }
      auto n = node(SExpr::Kind::Tuple, at);
      n->args.push_back(first);
      while (accept_punct(",")) n->args.push_back(expr());
      expect_punct(")");
      return n;
    }
    Token name = ident("an expression");
    auto n = node(SExpr::Kind::Ident, name);
    n->name = name.text;
    return n;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Symbol checks

class ScopeChecker {
 public:
  explicit ScopeChecker(std::set<std::string> declared) : declared_(std::move(declared)) {}

  void check(const SExpr& e, std::vector<std::string>& bound) const {
    switch (e.kind) {
      case SExpr::Kind::Ident: {
        bool ok = declared_.contains(e.name);
        for (const auto& b : bound) ok = ok || b == e.name;
        if (!ok) throw ParseError("unbound symbol '" + e.name + "'", e.line, e.col);
        return;
      }
      case SExpr::Kind::Compr: {
        std::size_t mark = bound.size();
        for (const auto& cl : e.compr->clauses) {
          check(*cl.expr, bound);
          if (cl.kind == SClause::Kind::For)
            for (const auto& n : cl.pattern.names) bound.push_back(n);
        }
        check(*e.compr->head, bound);
        bound.resize(mark);
        return;
      }
      default:
        for (const auto& a : e.args) check(*a, bound);
    }
  }

 private:
  std::set<std::string> declared_;
};

void check_symbols(const SurfaceModel& m) {
  std::set<std::string> declared;
  for (const auto& d : m.declarations) {
    std::vector<std::string> none;
    for (const auto& dim : d.dims) ScopeChecker(declared).check(*dim, none);
    if (d.bounds) {
      ScopeChecker(declared).check(*d.bounds->first, none);
      ScopeChecker(declared).check(*d.bounds->second, none);
    }
    if (!declared.insert(d.symbol).second) {
      throw ParseError("duplicate declaration of '" + d.symbol + "'", d.line, d.col);
    }
  }
  ScopeChecker sc(declared);
  std::vector<std::string> bound;
  sc.check(*m.objective, bound);
  for (const auto& c : m.constraints) {
    bound.clear();
    if (c.domain) sc.check(*c.domain, bound);
    if (c.index) bound = c.index->names;
    sc.check(*c.lhs, bound);
    sc.check(*c.rhs, bound);
  }
}

// ---------------------------------------------------------------------------
// Desugaring

Pattern fresh_pattern(const std::vector<std::string>& names, Scope& scope) {
  std::vector<Pattern> parts;
  for (const auto& n : names) {
    Var v = fresh_var(n, 0);
    scope.emplace_back(n, v);
    parts.push_back(Pattern::var(v));
  }
  if (parts.size() == 1) return parts.front();
  return Pattern::tuple(std::move(parts));
}

Expr lookup(const std::string& name, const Scope& scope) {
  for (auto it = scope.rbegin(); it != scope.rend(); ++it)
    if (it->first == name) return bvar(it->second);
  return fvar(name);
}

}  // namespace

Expr desugar_expr(const SExpr& e, const Scope& scope) {
  switch (e.kind) {
    case SExpr::Kind::Ident: return lookup(e.name, scope);
    case SExpr::Kind::Int: return int_lit(e.ival);
    case SExpr::Kind::Float: return float_lit(e.fval);
    case SExpr::Kind::Bool: return bool_lit(e.ival != 0);
    case SExpr::Kind::Tuple: {
      std::vector<Expr> items;
      for (const auto& a : e.args) items.push_back(desugar_expr(*a, scope));
      return tuple(std::move(items));
    }
    case SExpr::Kind::Prim: {
      std::vector<Expr> args;
      for (const auto& a : e.args) args.push_back(desugar_expr(*a, scope));
      return prim(e.op, std::move(args));
    }
    case SExpr::Kind::Index: {
      Expr base = desugar_expr(*e.args.front(), scope);
      std::vector<Expr> idx;
      for (std::size_t i = 1; i < e.args.size(); ++i) idx.push_back(desugar_expr(*e.args[i], scope));
      return index(base, std::move(idx));
    }
    case SExpr::Kind::Sum: return sum(desugar_expr(*e.args.front(), scope));
    case SExpr::Kind::Compr: return desugar(*e.compr, scope);
  }
  throw Error("unknown surface expression");
}

Expr desugar(const SurfaceComprehension& c, const Scope& scope) {
  if (c.clauses.empty() || c.clauses.front().kind != SClause::Kind::For)
    throw Error("comprehension must start with a for clause");

  // Current stream and the names of the tuple it yields.
  Expr stream = desugar_expr(*c.clauses.front().expr, scope);
  std::vector<std::string> bound = c.clauses.front().pattern.names;

  for (std::size_t k = 1; k < c.clauses.size(); ++k) {
    const SClause& cl = c.clauses[k];
    if (cl.kind == SClause::Kind::If) {
      Scope inner = scope;
      Pattern p = fresh_pattern(bound, inner);
      stream = filter(lam(p, desugar_expr(*cl.expr, inner)), stream);
      continue;
    }
    Scope outer = scope;
    Pattern p = fresh_pattern(bound, outer);
    Expr source = desugar_expr(*cl.expr, outer);
    Scope inner = outer;
    Pattern q = fresh_pattern(cl.pattern.names, inner);
    std::vector<std::string> joined = bound;
    joined.insert(joined.end(), cl.pattern.names.begin(), cl.pattern.names.end());
    // Earlier components must keep referring to the outer binders even if
    // the new pattern shadows a name.
    std::vector<Expr> items;
    for (std::size_t i = 0; i < bound.size(); ++i)
      items.push_back(p.is_tuple() ? pattern_expr(p.parts()[i]) : pattern_expr(p));
    for (std::size_t i = 0; i < cl.pattern.names.size(); ++i)
      items.push_back(q.is_tuple() ? pattern_expr(q.parts()[i]) : pattern_expr(q));
    stream = flat_map(lam(p, map(lam(q, tuple(std::move(items))), source)), stream);
    bound = std::move(joined);
  }

  Scope inner = scope;
  Pattern p = fresh_pattern(bound, inner);
  return map(lam(p, desugar_expr(*c.head, inner)), stream);
}

const Declaration* Model::find(const std::string& symbol) const {
  for (const auto& d : declarations)
    if (d.symbol == symbol) return &d;
  return nullptr;
}

std::set<std::string> Model::set_symbols() const {
  std::set<std::string> out;
  for (const auto& d : declarations)
    if (d.kind == DeclKind::CategorySet) out.insert(d.symbol);
  return out;
}

SurfaceModel parse_model(std::string_view text) {
  Parser p(text);
  SurfaceModel m = p.model();
  check_symbols(m);
  return m;
}

Model desugar_model(const SurfaceModel& m) {
  Model out;
  out.name = m.name;
  out.sense = m.sense;
  for (const auto& d : m.declarations) {
    Declaration cd;
    cd.symbol = d.symbol;
    cd.kind = d.kind;
    cd.description = d.description;
    for (const auto& dim : d.dims) cd.dims.push_back(desugar_expr(*dim));
    if (d.bounds) cd.bounds = std::make_pair(desugar_expr(*d.bounds->first), desugar_expr(*d.bounds->second));
    out.declarations.push_back(std::move(cd));
  }
  out.objective = desugar_expr(*m.objective);
  for (const auto& c : m.constraints) {
    Constraint cc;
    cc.name = c.name;
    cc.cmp = c.cmp;
    Scope scope;
    if (c.index) {
      cc.domain = desugar_expr(*c.domain);
      cc.index_patterns.push_back(fresh_pattern(c.index->names, scope));
    }
    cc.lhs = desugar_expr(*c.lhs, scope);
    cc.rhs = desugar_expr(*c.rhs, scope);
    out.constraints.push_back(std::move(cc));
  }
  return out;
}

Model load_model(std::string_view text) { return desugar_model(parse_model(text)); }

Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace mt
