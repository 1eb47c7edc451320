// Subcommand implementations for the dgt tool. Kept free of CLI parsing so the
// tests can drive them directly.
#pragma once

#include "dgt/dgt.hpp"
#include "dgt/tbb_executor.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dgt::cli {

enum ExitCode : int { kSuccess = 0, kFailure = 1, kUsage = 2 };

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string problem = "placement";
  std::string topology = "ring5";
  std::optional<int> agents;
  double lambda = 0.5;
  std::string alpha = "auto";
  std::size_t max_iters = 20000;
  double tol = 1e-12;
  std::uint64_t seed = 1;
  double init_lo = 0.0;
  double init_hi = 10.0;
  std::string x0;
  std::string trace_path;
  std::string report_path;
  std::string oracle_in;
  std::string oracle_out;
  bool oracle = true;
  bool audit = true;
  bool parallel = false;
  std::string alphas;
};

inline ProblemSpec load_problem(const std::string& name) {
  if (auto p = builtin_problem(name)) return *p;
  if (std::filesystem::exists(name)) return load_quadratic_problem(name);
  throw UsageError("unknown problem '" + name + "' (built-ins: example1, placement; or a problem file)");
}

/// Named topologies take N from --agents or the problem; `ringN` is the
/// undirected N-ring with Metropolis weights; anything else is a file path.
inline TopologySpec resolve_topology(const ExperimentConfig& cfg, std::optional<int> problem_agents) {
  const auto& name = cfg.topology;
  const auto pick_n = [&]() -> int {
    if (cfg.agents) return *cfg.agents;
    if (problem_agents) return *problem_agents;
    return 5;
  };
  if (auto kind = topology_kind_from_string(name); kind && *kind != TopologyKind::explicit_matrix) {
    TopologySpec spec;
    spec.kind = *kind;
    spec.n_agents = pick_n();
    spec.self_weight_parameter = cfg.lambda;
    return spec;
  }
  if (name.size() > 4 && name.rfind("ring", 0) == 0 &&
      name.find_first_not_of("0123456789", 4) == std::string::npos) {
    TopologySpec spec;
    spec.kind = TopologyKind::undirected_ring;
    spec.n_agents = std::stoi(name.substr(4));
    return spec;
  }
  if (std::filesystem::exists(name)) return load_topology(name);
  throw UsageError("unknown topology '" + name + "'");
}

inline WeightMatrix build_topology(const ExperimentConfig& cfg, std::optional<int> problem_agents) {
  const auto spec = resolve_topology(cfg, problem_agents);
  if (problem_agents && spec.n_agents != *problem_agents &&
      !(spec.kind == TopologyKind::explicit_matrix && spec.explicit_entries &&
        spec.explicit_entries->rows() == *problem_agents))
    throw UsageError("topology has " + std::to_string(spec.n_agents) + " agents but the problem has " +
                     std::to_string(*problem_agents));
  return build_weights(spec);
}

inline std::optional<double> parse_alpha(const std::string& s) {
  if (s == "auto") return std::nullopt;
  double a = 0.0;
  try {
    a = text::parse_double(s);
  } catch (const FormatError&) {
    throw UsageError("--alpha must be a positive number or 'auto'");
  }
  if (!(a > 0.0) || !std::isfinite(a)) throw UsageError("--alpha must be positive (got " + s + ")");
  return a;
}

inline void check_common(const ExperimentConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw UsageError("--tol must be positive");
  if (cfg.max_iters < 1) throw UsageError("--max-iters must be positive");
  if (!(cfg.init_hi > cfg.init_lo)) throw UsageError("--init-lo must be below --init-hi");
  if (cfg.agents && *cfg.agents < 2) throw UsageError("--agents must be at least 2");
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0)) throw UsageError("--lambda must lie in (0, 1)");
}

inline void write_file_once(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

struct Pipeline {
  ProblemSpec problem;
  WeightMatrix weights;
  double rho;
  Constants constants;
  StepsizeBound bound;
};

inline Pipeline prepare(const ExperimentConfig& cfg) {
  check_common(cfg);
  auto problem = load_problem(cfg.problem);
  auto weights = build_topology(cfg, problem.n_agents());
  const double rho = spectral_gap(weights);
  const Constants c = resolve_constants(problem);
  return {std::move(problem), std::move(weights), rho, c, max_stepsize(c, rho)};
}

inline Trace run_engine(const ProblemSpec& p, const WeightMatrix& w, const RunConfig& rc, bool parallel) {
  if (parallel) return run(p, w, rc, TbbExecutor{});
  return run(p, w, rc);
}

inline int cmd_validate_graph(const ExperimentConfig& cfg, std::ostream& out) {
  check_common(cfg);
  const auto spec = resolve_topology(cfg, std::nullopt);
  spec.check();
  Matrix entries;
  if (spec.kind == TopologyKind::explicit_matrix) {
    entries = *spec.explicit_entries;
  } else {
    entries = build_weights(spec).entries();
  }
  const auto report = validate(entries);
  const bool in_range = ((entries.array() >= 0.0) && (entries.array() <= 1.0)).all();
  out << "topology: " << to_string(spec.kind) << ", n=" << entries.rows() << '\n'
      << "row_stochastic: " << std::boolalpha << report.row_stochastic << '\n'
      << "column_stochastic: " << report.column_stochastic << '\n'
      << "strongly_connected: " << report.strongly_connected << '\n';
  if (!report.ok() || !in_range) {
    if (!in_range) out << "entries_in_unit_interval: false\n";
    out << "result: INVALID\n";
    return kFailure;
  }
  out << "rho: " << std::setprecision(12) << spectral_gap(WeightMatrix::from_entries(entries)) << '\n'
      << "result: OK\n";
  return kSuccess;
}

inline RunConfig make_run_config(const ExperimentConfig& cfg, const ProblemSpec& p, double alpha) {
  RunConfig rc;
  rc.alpha = alpha;
  rc.max_iters = cfg.max_iters;
  rc.x_tolerance = cfg.tol;
  rc.seed = cfg.seed;
  if (!cfg.x0.empty()) {
    Vector x0 = text::parse_vector(cfg.x0);
    if (x0.size() != p.total_dim())
      throw UsageError("--x0 needs " + std::to_string(p.total_dim()) + " numbers");
    rc.init = ExplicitStart{std::move(x0)};
  } else {
    rc.init = RandomBox{cfg.init_lo, cfg.init_hi};
  }
  return rc;
}

inline std::optional<OracleSolution> obtain_oracle(const ExperimentConfig& cfg, const ProblemSpec& p) {
  if (!cfg.oracle_in.empty()) {
    auto sol = load_oracle(cfg.oracle_in);
    if (sol.x_star.size() != p.total_dim()) throw UsageError("oracle file dimension does not match the problem");
    return sol;
  }
  if (!cfg.oracle) return std::nullopt;
  return centralized_solve(p);
}

inline int cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  const auto alpha_opt = parse_alpha(cfg.alpha);
  auto pipe = prepare(cfg);
  const double alpha = alpha_opt.value_or(0.9 * pipe.bound.alpha_bound);
  RunConfig rc = make_run_config(cfg, pipe.problem, alpha);
  const auto oracle = obtain_oracle(cfg, pipe.problem);
  if (oracle) rc.x_star = oracle->x_star;
  if (oracle && !cfg.oracle_out.empty()) {
    std::ostringstream buf;
    write_oracle(buf, *oracle);
    write_file_once(cfg.oracle_out, buf.str());
  }

  out << "problem: " << pipe.problem.name() << " (N=" << pipe.problem.n_agents() << ", n=" << pipe.problem.total_dim()
      << ", d=" << pipe.problem.agg_dim() << ")\n"
      << std::setprecision(10) << "rho: " << pipe.rho << '\n'
      << "alpha: " << alpha << (alpha_opt ? "" : " (auto = 0.9 * min(1/L1, alpha_s))") << '\n'
      << "alpha_s: " << pipe.bound.alpha_s << ", 1/L1: " << 1.0 / pipe.constants.l1 << '\n';

  Trace trace;
  try {
    trace = run_engine(pipe.problem, pipe.weights, rc, cfg.parallel);
  } catch (const DivergenceError& e) {
    out << "diverged: " << e.what() << '\n';
    return kFailure;
  }
  if (!cfg.trace_path.empty()) write_file_once(cfg.trace_path, trace_to_csv(trace));

  const auto& last = trace.records.back();
  out << "iterations: " << trace.iterations() << '\n' << "converged: " << std::boolalpha << trace.converged << '\n';
  const Vector x = trace.final_state.stacked_x();
  out << "final_x: " << text::format_vector(x) << '\n';
  if (last.err_x) out << "final_err_x: " << *last.err_x << '\n';
  out << "final_cons_sigma: " << last.cons_sigma << '\n' << "final_cons_y: " << last.cons_y << '\n';
  if (oracle) {
    double worst = 0.0;
    for (const auto& a : trace.final_state.agents) worst = std::max(worst, (a.sigma - oracle->sigma_star).norm());
    out << "sigma_star: " << text::format_vector(oracle->sigma_star) << '\n'
        << "max_sigma_error: " << worst << '\n';
    try {
      const auto fit = fit_linear_rate(trace);
      out << "empirical_q: " << fit.empirical_q << " (r2=" << fit.fit_r2 << ")\n";
    } catch (const RateFitError& e) {
      out << "empirical_q: n/a (" << e.what() << ")\n";
    }
  }
  if (cfg.audit) {
    const auto audit = tracking_audit(trace);
    out << "tracking_audit: max_deviation=" << audit.max_deviation() << (audit.holds() ? " OK" : " VIOLATED") << '\n';
    if (!audit.holds()) return kFailure;
  }
  return trace.converged ? kSuccess : kFailure;
}

inline std::vector<double> parse_alpha_grid(const std::string& s) {
  std::vector<double> grid;
  const Vector v = text::parse_vector(s);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw UsageError("step sizes in --alphas must be positive (the bound is open at 0)");
    grid.push_back(v[i]);
  }
  if (grid.empty()) throw UsageError("--alphas is empty");
  return grid;
}

inline int cmd_rate_report(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<double> grid;
  if (!cfg.alphas.empty()) grid = parse_alpha_grid(cfg.alphas);
  auto pipe = prepare(cfg);
  if (grid.empty())
    for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) grid.push_back(f * pipe.bound.alpha_bound);
  const auto oracle = obtain_oracle(cfg, pipe.problem);
  if (!oracle) throw UsageError("rate-report needs an oracle solution (drop --no-oracle or pass --oracle-in)");

  const auto threshold = stability_threshold(pipe.constants, pipe.rho);
  out << std::setprecision(10) << "problem: " << pipe.problem.name() << ", rho: " << pipe.rho
      << ", alpha_s: " << pipe.bound.alpha_s << ", 1/L1: " << 1.0 / pipe.constants.l1 << '\n'
      << "det(I - M(alpha)) root: " << (threshold ? text::format_double(*threshold) : std::string("none")) << '\n';

  std::vector<RateReport> rows;
  bool all_ok = true;
  for (double alpha : grid) {
    RateReport r;
    r.alpha = alpha;
    r.alpha_s = pipe.bound.alpha_s;
    r.rho_M = spectral_radius(build_M(alpha, pipe.constants, pipe.rho));
    RunConfig rc = make_run_config(cfg, pipe.problem, alpha);
    rc.x_star = oracle->x_star;
    try {
      const auto trace = run_engine(pipe.problem, pipe.weights, rc, cfg.parallel);
      const auto fit = fit_linear_rate(trace);
      r.empirical_q = fit.empirical_q;
      r.fit_r2 = fit.fit_r2;
      r.fit_first = fit.first;
      r.fit_last = fit.last;
      all_ok = all_ok && fit.contracting;
    } catch (const DivergenceError&) {
      r.empirical_q = std::numeric_limits<double>::infinity();
      r.fit_r2 = std::numeric_limits<double>::quiet_NaN();
      all_ok = false;
    } catch (const RateFitError&) {
      r.empirical_q = std::numeric_limits<double>::quiet_NaN();
      r.fit_r2 = std::numeric_limits<double>::quiet_NaN();
      all_ok = false;
    }
    rows.push_back(r);
  }
  print_rate_table(out, rows);
  std::string csv = std::string(kRateCsvHeader) + '\n';
  for (const auto& r : rows) csv += rate_csv_row(r) + '\n';
  if (!cfg.report_path.empty()) {
    write_file_once(cfg.report_path, csv);
  } else {
    out << csv;
  }
  return all_ok ? kSuccess : kFailure;
}

struct Example1Result {
  Vector optimum;
  Eigen::Vector2d nash;
  double f_optimum;
  double f_nash;
  std::size_t iterations;
};

inline Example1Result example1_contrast() {
  const auto p = builtin_example1();
  const auto w = build_weights({TopologyKind::complete, 2, 0.5, std::nullopt});
  RunConfig rc;
  rc.alpha = 0.1;
  rc.max_iters = 10000;
  rc.x_tolerance = 1e-12;
  rc.init = ExplicitStart{Vector::Zero(2)};
  const auto trace = run(p, w, rc);
  Example1Result r;
  r.optimum = trace.final_state.stacked_x();
  r.nash = nash_solve_example1();
  r.f_optimum = global_objective(r.optimum, p);
  r.f_nash = global_objective(Vector(r.nash), p);
  r.iterations = trace.iterations();
  return r;
}

inline int cmd_example1(std::ostream& out) {
  const auto r = example1_contrast();
  out << std::setprecision(8) << "cooperative optimum (DGT, " << r.iterations << " iterations): (" << r.optimum[0]
      << ", " << r.optimum[1] << ")  f = " << r.f_optimum << '\n'
      << "Nash equilibrium:                            (" << r.nash[0] << ", " << r.nash[1] << ")  f = " << r.f_nash
      << '\n'
      << "f(optimum) < f(Nash): " << std::boolalpha << (r.f_optimum < r.f_nash) << '\n';
  return r.f_optimum < r.f_nash ? kSuccess : kFailure;
}

}  // namespace dgt::cli
