#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace mt {

struct CliConfig {
  enum class Command { Render, Detect, Bench };
  Command command = Command::Render;
  std::string input;
  /// Empty writes to the given output stream.
  std::string output;
  bool no_split = false;
  bool no_optimize = false;
  std::string symbols;
  std::string rules;
  bool json = false;
  int iteration_limit = 64;
  double budget_seconds = 60.0;
  int repeat = 3;
};

int cmd_render(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_detect(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_bench(const CliConfig& cfg, std::ostream& out, std::ostream& err);
int run_command(const CliConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace mt
