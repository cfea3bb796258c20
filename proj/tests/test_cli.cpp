#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "modelterm/cli.hpp"

using namespace mt;

namespace {

std::string fixture(const std::string& name) { return std::string(MT_FIXTURES) + "/" + name; }

struct Run {
  int code;
  std::string out, err;
};

Run run(CliConfig cfg) {
  std::ostringstream out, err;
  int code = run_command(cfg, out, err);
  return {code, out.str(), err.str()};
}

CliConfig cfg(CliConfig::Command c, const std::string& file) {
  CliConfig k;
  k.command = c;
  k.input = fixture(file);
  return k;
}

}  // namespace

TEST_CASE("render the TSP fixture") {
  auto r = run(cfg(CliConfig::Command::Render, "tsp.model"));
  CHECK(r.code == 0);
  CHECK(r.out.find("\\sum _{t=0}^{") != std::string::npos);
  CHECK(r.out.find("\\bmod") != std::string::npos);
  CHECK(r.out.find("one city") != std::string::npos);
  CHECK(r.out.find("one time") != std::string::npos);
}

TEST_CASE("render is deterministic") {
  auto a = run(cfg(CliConfig::Command::Render, "dsn_small.model"));
  auto b = run(cfg(CliConfig::Command::Render, "dsn_small.model"));
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("render without optimization keeps bindings") {
  auto k = cfg(CliConfig::Command::Render, "even.model");
  k.no_optimize = true;
  auto r = run(k);
  CHECK(r.code == 0);
  CHECK(r.out.find("{i}_{1}={i}_{2}") != std::string::npos);
}

TEST_CASE("render of an empty model") {
  auto r = run(cfg(CliConfig::Command::Render, "empty.model"));
  CHECK(r.code == 0);
  CHECK(r.out.find("\\text{Problem}") != std::string::npos);
  CHECK(r.out.find("s.t.") == std::string::npos);
}

TEST_CASE("render reports limit fallbacks with exit code 2") {
  auto k = cfg(CliConfig::Command::Render, "even.model");
  k.iteration_limit = 1;
  auto r = run(k);
  CHECK(r.code == 2);
  CHECK_FALSE(r.out.empty());
}

TEST_CASE("render with a symbol table and output file") {
  std::string sym = std::string(MT_BINARY_DIR) + "/symbols.json";
  std::string out = std::string(MT_BINARY_DIR) + "/tsp.tex";
  std::ofstream(sym) << R"({"d": "\\mathit{dist}"})";
  auto k = cfg(CliConfig::Command::Render, "tsp.model");
  k.symbols = sym;
  k.output = out;
  auto r = run(k);
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str().find("\\mathit{dist}") != std::string::npos);
}

TEST_CASE("parse errors exit with 1") {
  std::string bad = std::string(MT_BINARY_DIR) + "/bad.model";
  std::ofstream(bad) << "problem \"x\" min;\nobjective: unknown;\n";
  for (auto c : {CliConfig::Command::Render, CliConfig::Command::Detect, CliConfig::Command::Bench}) {
    CliConfig k;
    k.command = c;
    k.input = bad;
    auto r = run(k);
    CHECK(r.code == 1);
    CHECK(r.err.find("bad.model:2") != std::string::npos);
  }
}

TEST_CASE("detect JSON report") {
  auto k = cfg(CliConfig::Command::Detect, "sos1_separated.model");
  k.json = true;
  auto r = run(k);
  CHECK(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["detections"].size() == 4);
  for (const auto& d : j["detections"]) {
    CHECK(d["kind"] == "sos1");
    CHECK(d["conditions"].is_array());
    CHECK(d["variable"].is_string());
  }
  CHECK(j["timing_ms"]["encode"].is_number());
  CHECK(j["timing_ms"]["saturate"].is_number());
  CHECK(j["premises"]["before"].is_number_integer());
  CHECK(j["premises"]["after"].is_number_integer());
}

TEST_CASE("detect on every fixture produces valid JSON") {
  for (auto name : {"tsp.model", "dsn_small.model", "even.model", "empty.model"}) {
    auto k = cfg(CliConfig::Command::Detect, name);
    k.json = true;
    auto r = run(k);
    CHECK(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j.contains("detections"));
    if (std::string(name) == "tsp.model") CHECK(j["detections"].empty());
  }
}

TEST_CASE("detect with and without splitting") {
  auto a = cfg(CliConfig::Command::Detect, "dsn_small.model");
  a.json = true;
  auto b = a;
  b.no_split = true;
  auto ja = nlohmann::json::parse(run(a).out);
  auto jb = nlohmann::json::parse(run(b).out);
  CHECK(ja["detections"].size() == jb["detections"].size());
  CHECK(ja["premises"]["before"] > ja["premises"]["after"]);
  CHECK(jb["premises"]["before"] == jb["premises"]["after"]);
}

TEST_CASE("bench") {
  auto k = cfg(CliConfig::Command::Bench, "sos1_separated.model");
  k.repeat = 2;
  k.json = true;
  auto j = nlohmann::json::parse(run(k).out);
  CHECK(j["split"]["exceeded"] == false);
  CHECK(j["no_split"]["exceeded"] == false);
  CHECK(j["ratio"].is_number());
  k.budget_seconds = 0;
  j = nlohmann::json::parse(run(k).out);
  CHECK(j["split"]["exceeded"] == true);
  CHECK(j["no_split"]["exceeded"] == true);
  k.json = false;
  auto r = run(k);
  CHECK(r.code == 0);
  CHECK(r.out.find("budget exceeded") != std::string::npos);
}
