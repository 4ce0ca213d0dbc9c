#include <iostream>

#include <CLI11.hpp>

#include "fedsched_cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace fedsched::cli;

  CLI::App app{"fedsched: federated learning client scheduling simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  std::uint64_t seed = 0;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Simulate one configuration");
  run->add_option("--config", run_opts.config, "Config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the config seed (and FEDSCHED_SEED)");
  auto* run_out_opt = run->add_option("--out", run_out, "Output directory");

  SweepOptions sweep_opts;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of configurations");
  sweep->add_option("--grid", sweep_opts.grid, "Grid file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--jobs", sweep_opts.jobs, "Maximum concurrent runs")->check(CLI::PositiveNumber);
  auto* sweep_out_opt = sweep->add_option("--out", sweep_out, "Output directory");

  AnalyzeOptions analyze_opts;
  double target = 0.0;
  std::string metric = "loss";
  std::string analyze_out = "analysis.csv";
  auto* analyze = app.add_subcommand("analyze", "Average and smooth per-round CSVs");
  analyze->add_option("--inputs", analyze_opts.inputs, "Glob of rounds.csv files")->required();
  analyze->add_option("--grid-step", analyze_opts.grid_step, "Grid spacing in seconds")
      ->required()
      ->check(CLI::PositiveNumber);
  analyze->add_option("--window", analyze_opts.window, "Trailing average length in grid points")
      ->required()
      ->check(CLI::PositiveNumber);
  auto* target_opt = analyze->add_option("--target", target, "Report time to this threshold");
  analyze->add_option("--metric", metric, "loss or accuracy")
      ->check(CLI::IsMember({"loss", "accuracy"}));
  analyze->add_option("--out", analyze_out, "Output CSV");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    if (*seed_opt) run_opts.seed = seed;
    if (*run_out_opt) run_opts.out = run_out;
    return cmd_run(run_opts, std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    if (*sweep_out_opt) sweep_opts.out = sweep_out;
    return cmd_sweep(sweep_opts, std::cout, std::cerr);
  }
  if (*target_opt) analyze_opts.target = target;
  analyze_opts.metric =
      metric == "accuracy" ? fedsched::TargetMetric::accuracy : fedsched::TargetMetric::loss;
  analyze_opts.out = analyze_out;
  return cmd_analyze(analyze_opts, std::cout, std::cerr);
}
