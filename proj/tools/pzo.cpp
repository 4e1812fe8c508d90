// pzo: run, sweep, compare or check projected zeroth-order optimization scenarios.

#include <iostream>

#include <CLI11.hpp>

#include "pzo/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Projected zeroth-order optimization simulator"};
  app.require_subcommand(1);

  pzo::CommandOptions opt;
  std::uint64_t seed = 0;
  double ratio = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "Output directory (default: config, then $PZO_OUT_DIR, then ./out)");
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--eps-omega-ratio", ratio, "Co-scale eps_omega = ratio * eps_a");
  };

  auto* run = app.add_subcommand("run", "Simulate one scenario and write trajectory, report and plots");
  common(run);
  auto* sweep = app.add_subcommand("sweep", "Run one scenario per parameter value");
  common(sweep);
  sweep->add_option("--param", opt.param, "eps_a | eps_omega | eps_xi | eps_theta | tau_d")->required();
  sweep->add_option("--values", opt.values, "Comma-separated values")->required();
  sweep->add_option("--workers", opt.workers, "Worker threads (default: number of cores)");
  sweep->add_option("--tol", opt.tol, "Terminal error below which a run counts as converged");
  auto* compare = app.add_subcommand("compare", "Co-simulate the algorithms listed in [compare]");
  common(compare);
  auto* check = app.add_subcommand("check", "Validate a scenario without running it");
  common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pzo::kExitValidation;
  }

  for (auto* sub : {run, sweep, compare, check}) {
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--eps-omega-ratio")) opt.eps_omega_ratio = ratio;
  }

  if (*run) return pzo::cmd_run(opt, std::cout, std::cerr);
  if (*sweep) return pzo::cmd_sweep(opt, std::cout, std::cerr);
  if (*compare) return pzo::cmd_compare(opt, std::cout, std::cerr);
  return pzo::cmd_check(opt, std::cout, std::cerr);
}
