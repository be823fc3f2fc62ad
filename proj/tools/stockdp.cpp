// stockdp: solve, analyze and simulate periodic-review inventory models.

#include <iostream>

#include <CLI11.hpp>

#include "stockdp/commands.hpp"

int main(int argc, char** argv) {
  using namespace stockdp;
  CLI::App app{"Discounted inventory control: value iteration, policy structure and Monte Carlo checks"};
  app.require_subcommand(1);

  CommandOptions opts;
  const auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opts.config_path, "JSON run configuration");
    if (config_required) c->required();
    sub->add_option("--out", opts.out_dir, "output directory (overrides output.dir)");
    sub->add_option("--format", opts.format, "csv or jsonl (overrides output.format)");
  };

  auto* solve = app.add_subcommand("solve", "value iteration; writes values, policies and the convergence trace");
  common(solve, true);
  auto* structure = app.add_subcommand("structure", "alpha*, N_alpha, thresholds and K-convexity report");
  common(structure, true);
  structure->add_flag("--inject-oracle-fault", opts.inject_oracle_fault)->group("");
  auto* sweep = app.add_subcommand("classify-sweep", "regime labels over an (alpha*, alpha) grid");
  common(sweep, false);
  sweep->add_option("--resolution", opts.sweep_resolution, "points per axis")->check(CLI::Range(2, 100000));
  sweep->add_option("--horizon", opts.sweep_horizon, "\"inf\" or a stage count");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of policy artifacts against DP values");
  common(simulate, true);
  auto* compare = app.add_subcommand("compare", "paired Monte Carlo comparison of policies");
  common(compare, true);
  for (auto* sub : {simulate, compare}) {
    sub->add_option("--seed", opts.seed, "simulation seed (overrides sim.seed)");
    sub->add_option("--policy", opts.policies, "policy artifact (x, order); repeatable");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (solve->parsed()) return cmd_solve(opts, std::cout, std::cerr);
  if (structure->parsed()) return cmd_structure(opts, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_classify_sweep(opts, std::cout, std::cerr);
  if (simulate->parsed()) return cmd_simulate(opts, std::cout, std::cerr);
  return cmd_compare(opts, std::cout, std::cerr);
}
