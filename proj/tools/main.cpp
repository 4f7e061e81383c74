#include <iostream>

#include <CLI11.hpp>

#include "stochsafe/cli.hpp"

namespace cli = stochsafe::cli;

namespace {

struct Raw {
  std::string orders = "1";
  std::string x0;
};

void solve_flags(CLI::App* app, cli::Options& o, Raw& raw) {
  app->add_option("config", o.config, "Problem JSON")->required()->check(CLI::ExistingFile);
  app->add_option("--orders", raw.orders, "Order range A..B or a single order")->capture_default_str();
  app->add_option("--r0", o.r0, "Initial-set radius override");
  app->add_option("--T", o.horizon, "Horizon override");
  app->add_option("--x0", raw.x0, "Initial point override, comma separated");
  app->add_option("--seed", o.seed, "Seed for verification sampling and simulation")->capture_default_str();
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
  app->add_option("--tol", o.tol, "Verification tolerance")->capture_default_str();
  app->add_option("--jobs", o.jobs, "Orders solved concurrently")->capture_default_str();
  app->add_flag("--allow-inexact", o.allow_inexact, "Accept solves that stopped short of the Optimal tolerances");
  app->add_flag("-v,--verbose", o.verbose, "Print solver iterations");
}

void sim_flags(CLI::App* app, cli::Options& o) {
  app->add_option("--n", o.n, "Trajectories per initial point")->capture_default_str();
  app->add_option("--dt", o.dt, "SDE step in time units (default 1e-3 of the horizon)");
  app->add_option("--sampling", o.sampling, "Initial sampling: fixed, uniform or grid")
      ->check(CLI::IsMember({"fixed", "uniform", "grid"}))
      ->capture_default_str();
  app->add_option("--x0-count", o.x0_count, "Initial points for uniform / grid sampling")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified unsafe-probability bounds for polynomial stochastic systems"};
  app.require_subcommand(1);
  cli::Options o;
  Raw raw;

  auto* bound = app.add_subcommand("bound", "Upper bounds on the probability of reaching the unsafe set");
  solve_flags(bound, o, raw);

  auto* contour = app.add_subcommand("contour", "Risk-contour certificates and a grid of the risk map");
  solve_flags(contour, o, raw);
  contour->add_option("--grid", o.grid, "Grid points per state")->capture_default_str();
  contour->add_option("--t", o.grid_time, "Time at which the grid is evaluated (default t0)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the ever-hit probability");
  simulate->add_option("config", o.config, "Problem JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--r0", o.r0, "Initial-set radius override");
  simulate->add_option("--T", o.horizon, "Horizon override");
  simulate->add_option("--x0", raw.x0, "Initial point, comma separated");
  simulate->add_option("--seed", o.seed)->capture_default_str();
  simulate->add_option("--out", o.out, "Output directory")->capture_default_str();
  simulate->add_option("--trajectories", o.trajectories, "Dump this many trajectories as CSV");
  sim_flags(simulate, o);

  auto* verify = app.add_subcommand("verify", "Solve, check certificates algebraically and against simulation");
  solve_flags(verify, o, raw);
  sim_flags(verify, o);
  verify->add_flag("--risk", o.risk, "Verify risk-contour certificates instead of bounds");

  auto* exp = app.add_subcommand("export", "Write the SDP of one order in SDPA sparse format");
  exp->add_option("config", o.config, "Problem JSON")->required()->check(CLI::ExistingFile);
  exp->add_option("--orders", raw.orders, "Order (the first of a range is used)")->capture_default_str();
  exp->add_option("--r0", o.r0, "Initial-set radius override");
  exp->add_option("--T", o.horizon, "Horizon override");
  exp->add_option("--x0", raw.x0, "Initial point override");
  exp->add_option("--out", o.out, "Output directory")->capture_default_str();
  exp->add_flag("--risk", o.risk, "Export the risk-contour program");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfig;
  }

  try {
    o.orders = cli::parse_orders(raw.orders);
    if (!raw.x0.empty()) o.x0 = cli::parse_point(raw.x0);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return cli::kConfig;
  }

  if (*bound) return cli::cmd_bound(o, std::cout);
  if (*contour) return cli::cmd_contour(o, std::cout);
  if (*simulate) return cli::cmd_simulate(o, std::cout);
  if (*verify) return cli::cmd_verify(o, std::cout);
  return cli::cmd_export(o, std::cout);
}
