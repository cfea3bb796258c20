#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "modelterm/ast.hpp"
#include "modelterm/ensugar.hpp"

namespace mt {

struct RenderPrefs {
  /// Custom LaTeX for free symbols, used verbatim.
  std::map<std::string, std::string> symbols;
  /// Symbols that iterate as labelled sets rather than 0..n-1.
  std::set<std::string> set_symbols;
};

std::string render_expr(Expr e, const RenderPrefs& prefs = {});

/// Stacked sums, one per membership condition; guards and bindings go
/// under the sum sign of the membership they follow.
std::string render_sum(const Comprehension& c, const RenderPrefs& prefs = {});

/// Full Problem / objective / s.t. / where layout.
std::string render_problem(const EnsugaredModel& m, const RenderPrefs& prefs = {});

/// Token stream used to compare LaTeX modulo whitespace and redundant
/// braces around single tokens.
std::vector<std::string> latex_tokens(std::string_view s);
std::string normalize_latex(std::string_view s);

/// Balanced braces, \left/\right and \begin/\end pairs.
bool latex_well_formed(std::string_view s, std::string* why = nullptr);

}  // namespace mt
