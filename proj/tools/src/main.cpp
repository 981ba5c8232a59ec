#include <CLI11.hpp>
#include <iostream>

#include "protonas/cli/commands.hpp"

using namespace protonas::cli;

int main(int argc, char** argv) {
  CLI::App app{"protonas: training-free multi-objective architecture search for microcontrollers"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string config, out, pareto, accuracy;
  std::uint64_t seed = 0;
  int jobs = 0, k = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Run configuration (JSON, comments allowed)");
    cmd->add_option("--out", out, "Run directory");
    cmd->add_option("--seed", seed, "Base seed; overrides the config and PROTONAS_SEED");
  };

  auto* explore = app.add_subcommand("explore", "Run the constrained search and write the trial log and pareto.csv");
  add_common(explore);
  explore->add_option("--jobs", jobs, "Concurrent evaluations (default: number of cores)")->check(CLI::PositiveNumber);
  explore->add_option("--k", k, "Subset size recorded in the run config")->check(CLI::PositiveNumber);

  auto* select = app.add_subcommand("select", "Pick the k-subset of the Pareto front with maximal hypervolume");
  add_common(select);
  select->add_option("--k", k, "Subset size")->check(CLI::PositiveNumber);
  select->add_option("--pareto", pareto, "Pareto CSV (default: <out>/pareto.csv)");

  auto* report = app.add_subcommand("report", "Write Kendall tau tables and the run summary");
  add_common(report);
  report->add_option("--accuracy", accuracy, "CSV with columns trial,accuracy from external training");

  auto* defaults = app.add_subcommand("print-defaults", "Print the default configuration");
  auto* check = app.add_subcommand("validate-config", "Check a configuration without running it");
  check->add_option("--config", config, "Run configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  if (!config.empty()) opts.config = config;
  if (!out.empty()) opts.out = out;
  if (!pareto.empty()) opts.pareto = pareto;
  if (!accuracy.empty()) opts.accuracy = accuracy;
  for (auto* cmd : {explore, select, report}) {
    if (cmd->parsed() && cmd->count("--seed")) opts.seed = seed;
  }
  if (jobs > 0) opts.jobs = jobs;
  if (k > 0) opts.k = k;

  if (explore->parsed()) return cmd_explore(opts, std::cout, std::cerr);
  if (select->parsed()) return cmd_select(opts, std::cout, std::cerr);
  if (report->parsed()) return cmd_report(opts, std::cout, std::cerr);
  if (defaults->parsed()) return cmd_print_defaults(std::cout);
  if (check->parsed()) return cmd_validate_config(opts, std::cout, std::cerr);
  return kExitError;
}
