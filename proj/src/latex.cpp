#include "modelterm/latex.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mt {

namespace {

const std::set<std::string>& greek() {
  static const std::set<std::string> g = {
      "alpha", "beta",  "gamma", "delta", "epsilon", "zeta",  "eta",     "theta",
      "iota",  "kappa", "lambda", "mu",   "nu",      "xi",    "pi",      "rho",
      "sigma", "tau",   "upsilon", "phi", "chi",     "psi",   "omega",   "Gamma",
      "Delta", "Theta", "Lambda", "Xi",   "Pi",      "Sigma", "Upsilon", "Phi",
      "Psi",   "Omega"};
  return g;
}

std::string escape_text(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '#' || c == '%' || c == '&') out += '\\';
    out += c;
  }
  return out;
}

std::string symbol_latex(const std::string& name) {
  if (name.size() == 1) return name;
  if (greek().contains(name)) return "\\" + name;
  // trailing digits become a subscript: x1 -> {x}_{1}
  auto cut = name.find_last_not_of("0123456789");
  if (cut != std::string::npos && cut + 1 < name.size()) {
    return "{" + symbol_latex(name.substr(0, cut + 1)) + "}_{" + name.substr(cut + 1) + "}";
  }
  return "\\mathrm{" + escape_text(name) + "}";
}

std::string number(double d) {
  if (std::isinf(d)) return d > 0 ? "\\infty" : "-\\infty";
  std::ostringstream os;
  os.precision(15);
  os << d;
  return os.str();
}

enum Prec { kLowest = 0, kOr = 1, kAnd = 2, kNot = 3, kCmp = 4, kAdd = 5, kMul = 6, kUnary = 7, kAtom = 8 };

int prec_of(Expr e) {
  if (!e.is(ExprKind::Prim)) {
    if (e.is(ExprKind::IntLit) && e.int_value() < 0) return kUnary;
    if (e.is(ExprKind::Sum)) return kAdd;
    return kAtom;
  }
  switch (e.op()) {
    case PrimOp::Or: return kOr;
    case PrimOp::And: return kAnd;
    case PrimOp::Not: return kNot;
    case PrimOp::Eq:
    case PrimOp::Neq:
    case PrimOp::Lt:
    case PrimOp::Le: return kCmp;
    case PrimOp::Add:
    case PrimOp::Sub: return kAdd;
    case PrimOp::Mul:
    case PrimOp::Mod: return kMul;
    case PrimOp::Div:
    case PrimOp::Count:
    case PrimOp::TupleIndex: return kAtom;
  }
  return kAtom;
}

class Renderer {
 public:
  Renderer(const RenderPrefs& prefs, std::span<const Expr> scope) : prefs_(prefs) {
    std::set<Var> all;
    for (auto e : scope) {
      for (const auto& v : vars_of(e)) all.insert(v);
    }
    std::map<std::string, std::vector<Var>> by_name;
    for (const auto& v : all) by_name[v.name].push_back(v);
    for (auto& [name, vs] : by_name) {
      std::sort(vs.begin(), vs.end(), [](const Var& a, const Var& b) {
        return std::tie(a.offset, a.nonce) < std::tie(b.offset, b.nonce);
      });
      for (std::size_t k = 0; k < vs.size(); ++k) {
        std::string base = symbol_latex(name);
        names_[vs[k]] = k == 0 ? base : "{" + base + "}_{" + std::to_string(k) + "}";
      }
    }
  }

  std::string var(const Var& v) const {
    auto it = names_.find(v);
    return it == names_.end() ? symbol_latex(v.name) : it->second;
  }

  std::string symbol(const std::string& s) const {
    auto it = prefs_.symbols.find(s);
    return it == prefs_.symbols.end() ? symbol_latex(s) : it->second;
  }

  std::string paren(const std::string& s) const { return "\\left(" + s + "\\right)"; }

  std::string at(Expr e, int min_prec) const {
    std::string s = expr(e);
    return prec_of(e) < min_prec ? paren(s) : s;
  }

  std::string tuple(Expr e, bool angle) const {
    std::string out = angle ? "\\left\\langle " : "\\left(";
    for (std::size_t i = 0; i < e.children().size(); ++i) {
      out += (i ? "," : "") + pat(e.child(i));
    }
    return out + (angle ? "\\right\\rangle " : "\\right)");
  }

  // Binding positions: tuples in angle brackets.
  std::string pat(Expr e) const { return e.is(ExprKind::Tuple) ? tuple(e, true) : expr(e); }

  std::string pattern(const Pattern& p) const {
    if (!p.is_tuple()) return var(p.var());
    std::string out = "\\left(";
    for (std::size_t i = 0; i < p.parts().size(); ++i) out += (i ? ", " : "") + pattern(p.parts()[i]);
    return out + "\\right)";
  }

  std::string upper_bound(Expr s) const {
    if (s.is(ExprKind::Range)) s = s.child(0);
    if (s.is(ExprKind::IntLit)) return std::to_string(s.int_value() - 1);
    return at(s, kAdd) + "-1";
  }

  std::string range_set(Expr s) const {
    return "\\left\\{0,\\ldots ," + upper_bound(s) + "\\right\\}";
  }

  std::string condition(Expr c, bool for_all) const {
    switch (c.kind()) {
      case ExprKind::Mem: {
        Expr p = c.child(0);
        Expr s = c.child(1);
        if (is_natural_source(s, prefs_.set_symbols)) {
          if (for_all) return pat(p) + "\\in " + range_set(s);
          if (p.is(ExprKind::BVar)) return pat(p) + "=0";
          return pat(p) + "\\in " + range_set(s);
        }
        return pat(p) + "\\in " + expr(s);
      }
      case ExprKind::If:
        return expr(c.child(0));
      case ExprKind::Let:
        return pat(c.child(0)) + "=" + pat(c.child(1));
      default:
        return expr(c);
    }
  }

  std::string sum(const Comprehension& c) const {
    std::vector<std::vector<Expr>> groups;
    for (auto cond : c.conditions) {
      if (cond.is(ExprKind::Mem) || groups.empty()) groups.emplace_back();
      groups.back().push_back(cond);
    }
    std::string out;
    for (const auto& g : groups) {
      std::vector<std::string> lines;
      for (auto cond : g) lines.push_back(condition(cond, false));
      std::string upper;
      Expr first = g.front();
      if (first.is(ExprKind::Mem) && first.child(0).is(ExprKind::BVar) &&
          is_natural_source(first.child(1), prefs_.set_symbols)) {
        upper = "^{" + upper_bound(first.child(1)) + "}";
      }
      std::string lower;
      if (lines.size() == 1) {
        lower = lines.front();
      } else {
        lower = "\\substack{";
        for (std::size_t i = 0; i < lines.size(); ++i) lower += (i ? "\\\\" : "") + lines[i];
        lower += "}";
      }
      out += "\\sum _{" + lower + "}" + upper;
    }
    return out + at(c.head, kMul);
  }

  std::string lambda(Expr fn) const {
    return "\\lambda " + pattern(fn.pattern()) + ".\\; " + expr(fn.child(0));
  }

  std::string stream_op(const char* name, Expr e) const {
    return std::string("\\mathsf{") + name + "}\\left(" + lambda(e.child(0)) + ", " +
           expr(e.child(1)) + "\\right)";
  }

  std::string prim(Expr e) const {
    auto a = [&](std::size_t i) { return e.child(i); };
    switch (e.op()) {
      case PrimOp::Add:
        return at(a(0), kAdd) + "+" + at(a(1), kAdd);
      case PrimOp::Sub:
        return at(a(0), kAdd) + "-" + at(a(1), kMul);
      case PrimOp::Mul: {
        std::string l = at(a(0), kMul);
        std::string r = at(a(1), kMul);
        bool digit = !r.empty() && (std::isdigit(static_cast<unsigned char>(r[0])) || r[0] == '-');
        return l + (digit ? "\\cdot " : " ") + r;
      }
      case PrimOp::Div:
        return "\\frac{" + expr(a(0)) + "}{" + expr(a(1)) + "}";
      case PrimOp::Mod:
        return at(a(0), kMul) + "\\bmod " + at(a(1), kAtom);
      case PrimOp::Eq:
        return at(a(0), kAdd) + "=" + at(a(1), kAdd);
      case PrimOp::Neq:
        return at(a(0), kAdd) + "\\neq " + at(a(1), kAdd);
      case PrimOp::Lt:
        return at(a(0), kAdd) + "<" + at(a(1), kAdd);
      case PrimOp::Le:
        return at(a(0), kAdd) + "\\leq " + at(a(1), kAdd);
      case PrimOp::And:
        return at(a(0), kAnd) + "\\land " + at(a(1), kNot);
      case PrimOp::Or:
        return at(a(0), kOr) + "\\lor " + at(a(1), kAnd);
      case PrimOp::Not:
        return "\\lnot " + at(a(0), kNot);
      case PrimOp::Count:
        return "\\#" + at(a(0), kAtom);
      case PrimOp::TupleIndex:
        return "{" + at(a(0), kAtom) + "}_{\\left(" + expr(a(1)) + "\\right)}";
    }
    return "";
  }

  std::string expr(Expr e) const {
    switch (e.kind()) {
      case ExprKind::FVar:
        return symbol(e.symbol());
      case ExprKind::BVar:
        return var(e.var());
      case ExprKind::IntLit:
        return std::to_string(e.int_value());
      case ExprKind::FloatLit:
        return number(e.float_value());
      case ExprKind::BoolLit:
        return e.bool_value() ? "\\mathrm{true}" : "\\mathrm{false}";
      case ExprKind::Tuple:
        return tuple(e, false);
      case ExprKind::Prim:
        return prim(e);
      case ExprKind::Index: {
        Expr base = e.child(0);
        std::string b = base.is(ExprKind::FVar) || base.is(ExprKind::BVar) ? expr(base)
                                                                              : paren(expr(base));
        std::string out = "{" + b + "}_{";
        for (std::size_t i = 1; i < e.children().size(); ++i) out += (i > 1 ? "," : "") + expr(e.child(i));
        return out + "}";
      }
      case ExprKind::Sum: {
        Expr s = e.child(0);
        if (s.is(ExprKind::Compr)) return sum(Comprehension::from_expr(s));
        return "\\sum " + at(s, kAtom);
      }
      case ExprKind::Map:
        return stream_op("map", e);
      case ExprKind::FlatMap:
        return stream_op("flat\\_map", e);
      case ExprKind::Filter:
        return stream_op("filter", e);
      case ExprKind::Lam:
        return lambda(e);
      case ExprKind::App: {
        std::string out = at(e.child(0), kAtom) + "\\left(";
        for (std::size_t i = 1; i < e.children().size(); ++i) out += (i > 1 ? ", " : "") + expr(e.child(i));
        return out + "\\right)";
      }
      case ExprKind::Range:
        return range_set(e);
      case ExprKind::Mem:
      case ExprKind::If:
      case ExprKind::Let:
        return condition(e, true);
      case ExprKind::Compr: {
        auto c = Comprehension::from_expr(e);
        std::string out = "\\left\\{" + expr(c.head) + "\\;\\middle|\\;";
        for (std::size_t i = 0; i < c.conditions.size(); ++i) {
          out += (i ? ",\\;" : "") + condition(c.conditions[i], true);
        }
        return out + "\\right\\}";
      }
    }
    return "";
  }

 private:
  const RenderPrefs& prefs_;
  std::map<Var, std::string> names_;
};

std::string cmp_latex(Cmp c) {
  switch (c) {
    case Cmp::Eq: return "=";
    case Cmp::Le: return "\\leq ";
    case Cmp::Ge: return "\\geq ";
  }
  return "=";
}

std::string constraint_line(const EnsugaredConstraint& k, const RenderPrefs& prefs) {
  std::vector<Expr> scope = {k.lhs, k.rhs};
  scope.insert(scope.end(), k.conditions.begin(), k.conditions.end());
  Renderer r(prefs, scope);
  std::string out = "\\text{" + escape_text(k.name) + "}&\\quad \\displaystyle " + r.expr(k.lhs) +
                    cmp_latex(k.cmp) + r.expr(k.rhs);
  if (!k.conditions.empty()) {
    std::string vars;
    for (const auto& v : k.bound()) vars += (vars.empty() ? "" : ",") + r.var(v);
    out += "\\quad \\forall " + vars + "\\;\\text{s.t.}\\;";
    for (std::size_t i = 0; i < k.conditions.size(); ++i) {
      out += (i ? ",\\;" : "") + r.condition(k.conditions[i], true);
    }
  }
  return out;
}

std::string decl_type(const Declaration& d, const Renderer& r) {
  switch (d.kind) {
    case DeclKind::BinaryVar:
      return "\\left\\{0, 1\\right\\}";
    case DeclKind::ContinuousVar:
    case DeclKind::Placeholder: {
      if (!d.bounds) return "\\mathbb{R}";
      Expr hi = d.bounds->second;
      bool open = hi.is(ExprKind::FloatLit) && std::isinf(hi.float_value());
      return "\\left[" + r.expr(d.bounds->first) + ", " + r.expr(hi) +
             (open ? "\\right)" : "\\right]");
    }
    case DeclKind::CategorySet:
      return "";
  }
  return "";
}

std::string decl_row(const Declaration& d, const RenderPrefs& prefs) {
  std::vector<Expr> scope = d.dims;
  Renderer r(prefs, scope);
  std::string type = decl_type(d, r);
  std::string dom;
  if (d.dims.empty()) {
    dom = type;
  } else {
    std::string dims;
    for (std::size_t i = 0; i < d.dims.size(); ++i) dims += (i ? "\\times " : "") + r.expr(d.dims[i]);
    dom = "\\mathop{\\mathrm{TotalDict}}\\left[" + dims + ";" + type + "\\right]";
  }
  return r.symbol(d.symbol) + "&\\in " + dom + "&\\quad &\\text{" + d.description + "}\\\\";
}

}  // namespace

std::string render_expr(Expr e, const RenderPrefs& prefs) {
  Renderer r(prefs, std::span<const Expr>(&e, 1));
  return r.expr(e);
}

std::string render_sum(const Comprehension& c, const RenderPrefs& prefs) {
  Expr e = c.to_expr();
  Renderer r(prefs, std::span<const Expr>(&e, 1));
  return r.sum(c);
}

std::string render_problem(const EnsugaredModel& m, const RenderPrefs& base) {
  RenderPrefs prefs = base;
  auto sets = m.model.set_symbols();
  prefs.set_symbols.insert(sets.begin(), sets.end());

  std::ostringstream os;
  os << "\\begin{array}{rl}\n";
  os << "\\text{Problem}\\colon &\\text{" << escape_text(m.model.name) << "}\\\\";
  os << "\\displaystyle " << (m.model.sense == Sense::Minimize ? "\\min" : "\\max") << " &\\displaystyle "
     << (m.objective ? render_expr(m.objective, prefs) : "0");
  if (!m.constraints.empty()) {
    os << "\\\\\\text{s.t.}&\\begin{aligned}\n";
    for (std::size_t i = 0; i < m.constraints.size(); ++i) {
      os << constraint_line(m.constraints[i], prefs) << (i + 1 < m.constraints.size() ? "\\\\\n" : "\n");
    }
    os << "\\end{aligned}\n";
  }

  auto section = [&](const char* title, DeclKind k1, DeclKind k2) {
    std::string rows;
    for (const auto& d : m.model.declarations) {
      if (d.kind == k1 || d.kind == k2) rows += decl_row(d, prefs);
    }
    if (rows.empty()) return std::string();
    return std::string("&\\text{") + title + ":}\\\\&\\qquad \\begin{alignedat}{2}" + rows +
           "\\end{alignedat}";
  };
  std::vector<std::string> blocks;
  if (auto s = section("Decision Variables", DeclKind::BinaryVar, DeclKind::ContinuousVar); !s.empty()) {
    blocks.push_back(s);
  }
  if (auto s = section("Placeholders", DeclKind::Placeholder, DeclKind::Placeholder); !s.empty()) {
    blocks.push_back(s);
  }
  std::string labels;
  for (const auto& d : m.model.declarations) {
    if (d.kind != DeclKind::CategorySet) continue;
    if (!labels.empty()) labels += "\\\\\n";
    auto it = prefs.symbols.find(d.symbol);
    labels += (it == prefs.symbols.end() ? symbol_latex(d.symbol) : it->second) + "&\\text{" +
              d.description + "}";
  }
  if (!labels.empty()) {
    blocks.push_back("&\\text{Category Labels:}\\\\&\\qquad \\begin{array}{rl}\n" + labels +
                     "\\end{array}");
  }
  if (!blocks.empty()) {
    os << "\\\\\\text{where}";
    for (std::size_t i = 0; i < blocks.size(); ++i) os << (i ? "\\\\" : "") << blocks[i];
  }
  os << "\n\\end{array}\n";
  return os.str();
}

// ---------------------------------------------------------------------------

std::vector<std::string> latex_tokens(std::string_view s) {
  std::vector<std::string> raw;
  for (std::size_t i = 0; i < s.size();) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\\') {
      std::size_t j = i + 1;
      if (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) {
        while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      } else if (j < s.size()) {
        ++j;
      }
      raw.emplace_back(s.substr(i, j - i));
      i = j;
    } else {
      raw.emplace_back(1, c);
      ++i;
    }
  }
  // Drop braces around single tokens until nothing changes.
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == "{" && i + 2 < raw.size() && raw[i + 2] == "}" && raw[i + 1] != "{" &&
          raw[i + 1] != "}" && raw[i + 1][0] != '\\') {
        out.push_back(raw[i + 1]);
        i += 2;
        changed = true;
      } else {
        out.push_back(raw[i]);
      }
    }
    raw = std::move(out);
  }
  return raw;
}

std::string normalize_latex(std::string_view s) {
  std::string out;
  bool after_command = false;
  for (const auto& t : latex_tokens(s)) {
    if (after_command && std::isalpha(static_cast<unsigned char>(t[0]))) out += ' ';
    out += t;
    after_command = t.size() > 1 && t[0] == '\\' && std::isalpha(static_cast<unsigned char>(t[1]));
  }
  return out;
}

bool latex_well_formed(std::string_view s, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  std::vector<std::string> stack;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      std::string cmd(s.substr(i + 1, j - i - 1));
      if (cmd.empty()) {
        i = j;  // escaped character
        continue;
      }
      if (cmd == "left") stack.push_back("left");
      if (cmd == "right") {
        if (stack.empty() || stack.back() != "left") return fail("unmatched \\right");
        stack.pop_back();
      }
      if (cmd == "begin" || cmd == "end") {
        auto close = s.find('}', j);
        if (j >= s.size() || s[j] != '{' || close == std::string_view::npos) {
          return fail("malformed \\" + cmd);
        }
        std::string env(s.substr(j + 1, close - j - 1));
        if (cmd == "begin") {
          stack.push_back("env:" + env);
        } else {
          if (stack.empty() || stack.back() != "env:" + env) return fail("unmatched \\end{" + env + "}");
          stack.pop_back();
        }
        j = close + 1;
      }
      i = j - 1;
    } else if (c == '{') {
      stack.push_back("{");
    } else if (c == '}') {
      if (stack.empty() || stack.back() != "{") return fail("unmatched '}'");
      stack.pop_back();
    }
  }
  if (!stack.empty()) return fail("unclosed " + stack.back());
  return true;
}

}  // namespace mt
