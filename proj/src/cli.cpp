#include "modelterm/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "modelterm/detect.hpp"
#include "modelterm/ensugar.hpp"
#include "modelterm/latex.hpp"
#include "modelterm/surface.hpp"

namespace mt {

namespace {

using json = nlohmann::json;

std::optional<Model> load(const CliConfig& cfg, std::ostream& err) {
  try {
    return load_model_file(cfg.input);
  } catch (const ParseError& e) {
    err << cfg.input << ":" << e.what() << "\n";
  } catch (const Error& e) {
    err << cfg.input << ": " << e.what() << "\n";
  }
  return std::nullopt;
}

bool emit(const CliConfig& cfg, const std::string& text, std::ostream& out, std::ostream& err) {
  if (cfg.output.empty()) {
    out << text;
    return true;
  }
  std::ofstream f(cfg.output);
  if (!f) {
    err << "cannot write " << cfg.output << "\n";
    return false;
  }
  f << text;
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

DetectOptions detect_options(const CliConfig& cfg) {
  DetectOptions o;
  o.split = !cfg.no_split;
  o.iteration_limit = cfg.iteration_limit;
  if (!cfg.rules.empty()) o.rules = read_file(cfg.rules);
  return o;
}

json report_json(const DetectionReport& r, const Model& m) {
  auto sets = m.set_symbols();
  json dets = json::array();
  for (const auto& d : r.detections) {
    json conds = json::array();
    for (auto c : d.conditions) conds.push_back(condition_sexpr(c, sets));
    json ctx = json::array();
    for (auto c : d.context) ctx.push_back(condition_sexpr(c, sets));
    dets.push_back({{"kind", d.kind}, {"conditions", conds}, {"variable", to_sexpr(d.variable)},
                    {"context", ctx}});
  }
  return {{"detections", dets},
          {"timing_ms", {{"encode", r.encode_ms}, {"saturate", r.saturate_ms}}},
          {"premises", {{"before", r.premises.before}, {"after", r.premises.after}}},
          {"saturated", r.saturated},
          {"warnings", r.warnings}};
}

struct BenchRun {
  bool exceeded = false;
  double ms = 0;
  std::size_t detections = 0;
};

BenchRun bench_mode(const Model& m, DetectOptions o, double budget, int repeat) {
  std::vector<double> times;
  BenchRun out;
  for (int i = 0; i <= repeat; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    o.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(std::max(budget, 0.0)));
    auto r = run_detection(m, o);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (r.timed_out || budget <= 0) {
      out.exceeded = true;
      return out;
    }
    out.detections = r.detections.size();
    if (i > 0) times.push_back(ms);
  }
  std::sort(times.begin(), times.end());
  out.ms = times.empty() ? 0 : times[times.size() / 2];
  return out;
}

}  // namespace

int cmd_render(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto m = load(cfg, err);
  if (!m) return 1;
  RenderPrefs prefs;
  prefs.set_symbols = m->set_symbols();
  try {
    if (!cfg.symbols.empty()) {
      auto table = json::parse(read_file(cfg.symbols));
      for (const auto& [k, v] : table.items()) {
        prefs.symbols[k] = v.get<std::string>();
      }
    }
  } catch (const std::exception& e) {
    err << "symbols: " << e.what() << "\n";
    return 1;
  }
  EnsugarOptions o;
  o.optimize = !cfg.no_optimize;
  o.limits.iteration_limit = cfg.iteration_limit;
  auto em = ensugar_model(*m, o);
  if (!emit(cfg, render_problem(em, prefs) + "\n", out, err)) return 1;
  if (em.stats.fallbacks > 0) {
    err << em.stats.fallbacks << " of " << em.stats.comprehensions
        << " comprehensions hit the iteration limit and were left unoptimized\n";
    return 2;
  }
  return 0;
}

int cmd_detect(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto m = load(cfg, err);
  if (!m) return 1;
  DetectionReport r;
  try {
    r = run_detection(*m, detect_options(cfg));
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  }
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  std::ostringstream os;
  if (cfg.json) {
    os << report_json(r, *m).dump(2) << "\n";
  } else {
    auto sets = m->set_symbols();
    os << r.detections.size() << " detection(s)\n";
    for (const auto& d : r.detections) {
      os << d.kind << " " << to_sexpr(d.variable) << " for";
      for (auto c : d.conditions) os << " " << condition_sexpr(c, sets);
      if (!d.context.empty()) {
        os << " given";
        for (auto c : d.context) os << " " << condition_sexpr(c, sets);
      }
      os << "\n";
    }
    os << std::fixed << std::setprecision(3) << "encode " << r.encode_ms << " ms, saturate "
       << r.saturate_ms << " ms, premise size " << r.premises.before << " -> " << r.premises.after
       << "\n";
  }
  return emit(cfg, os.str(), out, err) ? 0 : 1;
}

int cmd_bench(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  auto m = load(cfg, err);
  if (!m) return 1;
  DetectOptions o;
  try {
    o = detect_options(cfg);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return 1;
  }
  o.split = true;
  auto split = bench_mode(*m, o, cfg.budget_seconds, cfg.repeat);
  o.split = false;
  auto whole = bench_mode(*m, o, cfg.budget_seconds, cfg.repeat);

  std::optional<double> ratio;
  if (!split.exceeded && !whole.exceeded && split.ms > 0) ratio = whole.ms / split.ms;
  std::ostringstream os;
  if (cfg.json) {
    auto run = [](const BenchRun& b) {
      json j = {{"exceeded", b.exceeded}};
      if (!b.exceeded) {
        j["ms"] = b.ms;
        j["detections"] = b.detections;
      }
      return j;
    };
    json j = {{"split", run(split)}, {"no_split", run(whole)}, {"budget_s", cfg.budget_seconds}};
    j["ratio"] = ratio ? json(*ratio) : json(nullptr);
    os << j.dump(2) << "\n";
  } else {
    auto line = [&](const char* label, const BenchRun& b) {
      os << label;
      if (b.exceeded) {
        os << "budget exceeded (" << cfg.budget_seconds << " s)\n";
      } else {
        os << std::fixed << std::setprecision(3) << b.ms << " ms, " << b.detections
           << " detection(s)\n";
      }
    };
    line("split:    ", split);
    line("no split: ", whole);
    os << "ratio:    ";
    if (ratio) {
      os << std::fixed << std::setprecision(2) << *ratio << "x\n";
    } else {
      os << "n/a\n";
    }
  }
  return emit(cfg, os.str(), out, err) ? 0 : 1;
}

int run_command(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  switch (cfg.command) {
    case CliConfig::Command::Render: return cmd_render(cfg, out, err);
    case CliConfig::Command::Detect: return cmd_detect(cfg, out, err);
    case CliConfig::Command::Bench: return cmd_bench(cfg, out, err);
  }
  return 1;
}

}  // namespace mt
