#include <iostream>

#include <CLI11.hpp>

#include "modelterm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Render optimization models to LaTeX and detect SOS1 structure"};
  app.require_subcommand(1);
  mt::CliConfig cfg;

  auto* render = app.add_subcommand("render", "Render a model as LaTeX");
  render->add_option("input", cfg.input, "Model file")->required()->check(CLI::ExistingFile);
  render->add_option("-o,--output", cfg.output, "Output file (default stdout)");
  render->add_flag("--no-optimize", cfg.no_optimize, "Skip comprehension optimization");
  render->add_option("--symbols", cfg.symbols, "JSON object mapping symbols to LaTeX")
      ->check(CLI::ExistingFile);
  render->add_option("--iteration-limit", cfg.iteration_limit, "Saturation iteration limit")
      ->check(CLI::PositiveNumber);

  auto* detect = app.add_subcommand("detect", "Detect SOS1 constraints");
  detect->add_option("input", cfg.input, "Model file")->required()->check(CLI::ExistingFile);
  detect->add_option("-o,--output", cfg.output, "Output file (default stdout)");
  detect->add_flag("--json", cfg.json, "Emit a JSON report");
  detect->add_flag("--no-split", cfg.no_split, "Keep domain premises whole");
  detect->add_option("--rules", cfg.rules, "Detection rule file")->check(CLI::ExistingFile);
  detect->add_option("--iteration-limit", cfg.iteration_limit, "Saturation iteration limit")
      ->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Time detection with and without premise splitting");
  bench->add_option("input", cfg.input, "Model file")->required()->check(CLI::ExistingFile);
  bench->add_option("-o,--output", cfg.output, "Output file (default stdout)");
  bench->add_option("--budget", cfg.budget_seconds, "Wall-clock budget per run in seconds")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--repeat", cfg.repeat, "Timed runs after warmup")->check(CLI::PositiveNumber);
  bench->add_flag("--json", cfg.json, "Emit JSON");
  bench->add_option("--rules", cfg.rules, "Detection rule file")->check(CLI::ExistingFile);
  bench->add_option("--iteration-limit", cfg.iteration_limit, "Saturation iteration limit")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  if (render->parsed()) cfg.command = mt::CliConfig::Command::Render;
  if (detect->parsed()) cfg.command = mt::CliConfig::Command::Detect;
  if (bench->parsed()) cfg.command = mt::CliConfig::Command::Bench;
  return mt::run_command(cfg, std::cout, std::cerr);
}
