// dgt: command-line driver for distributed gradient tracking experiments.
//
//   dgt validate-graph --topology directed-ring --agents 5 --lambda 0.5
//   dgt run --problem placement --topology ring5 --alpha 0.05 --trace trace.csv
//   dgt rate-report --problem placement --topology ring5 --report rates.csv
//   dgt example1
//
// Every option may also come from `--config file` (key=value lines, keys are
// the long option names); flags on the command line win.

#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace dgt::cli;
  ExperimentConfig cfg;
  CLI::App app{"Distributed gradient tracking for aggregative optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file with option defaults");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());

  int agents = 0;
  app.add_option("--problem", cfg.problem, "example1 | placement | quadratic problem file")->capture_default_str();
  app.add_option("--topology", cfg.topology,
                 "complete | directed-ring | undirected-ring | star | path | ringN | topology file")
      ->capture_default_str();
  auto* agents_opt = app.add_option("--agents", agents, "number of agents for named topologies");
  app.add_option("--lambda", cfg.lambda, "directed-ring off-diagonal weight in (0,1)")->capture_default_str();
  app.add_option("--alpha", cfg.alpha, "step size, or 'auto' = 0.9*min(1/L1, alpha_s)")->capture_default_str();
  app.add_option("--max-iters", cfg.max_iters, "iteration cap")->capture_default_str();
  app.add_option("--tol", cfg.tol, "stop when ||x_{k+1} - x_k|| < tol")->capture_default_str();
  app.add_option("--seed", cfg.seed, "seed for the random initial point")->capture_default_str();
  app.add_option("--init-lo", cfg.init_lo, "random initial box lower bound")->capture_default_str();
  app.add_option("--init-hi", cfg.init_hi, "random initial box upper bound")->capture_default_str();
  app.add_option("--x0", cfg.x0, "explicit stacked initial point (comma or space separated)");
  app.add_option("--trace", cfg.trace_path, "trace CSV output path");
  app.add_option("--report", cfg.report_path, "rate report CSV output path");
  app.add_option("--oracle-in", cfg.oracle_in, "read the optimum from a key=value oracle file");
  app.add_option("--oracle-out", cfg.oracle_out, "write the computed optimum as a key=value file");
  app.add_flag("--oracle,!--no-oracle", cfg.oracle, "solve for the optimum to populate err_x")->capture_default_str();
  app.add_flag("--audit,!--no-audit", cfg.audit, "check the average-tracking identities")->capture_default_str();
  app.add_flag("--parallel", cfg.parallel, "run agent updates in parallel");
  app.add_option("--alphas", cfg.alphas, "rate-report step-size grid (comma separated)");

  auto* validate_cmd = app.add_subcommand("validate-graph", "check a topology and print its spectral gap");
  auto* run_cmd = app.add_subcommand("run", "run DGT and write a trace");
  auto* rate_cmd = app.add_subcommand("rate-report", "compare rho(M(alpha)) with fitted rates");
  auto* ex1_cmd = app.add_subcommand("example1", "cooperative optimum versus Nash equilibrium");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kUsage;
  }
  if (agents_opt->count() > 0) cfg.agents = agents;

  try {
    if (*validate_cmd) return cmd_validate_graph(cfg, std::cout);
    if (*run_cmd) return cmd_run(cfg, std::cout);
    if (*rate_cmd) return cmd_rate_report(cfg, std::cout);
    if (*ex1_cmd) return cmd_example1(std::cout);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const dgt::FormatError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const dgt::GraphError& e) {
    std::cerr << "invalid topology: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
