// Reference computations independent of the distributed iteration: the
// centralized optimum (two routes for quadratics), finite-difference
// gradients, and the Nash equilibrium of the two-agent example.
#pragma once

#include "dgt/common.hpp"
#include "dgt/model.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <string>

namespace dgt {

enum class SolveMethod { linear_system, centralized_gd };

inline std::string to_string(SolveMethod m) {
  return m == SolveMethod::linear_system ? "linear-system" : "centralized-gd";
}

inline constexpr double kOracleResidualLimit = 1e-8;

struct OracleSolution {
  Vector x_star;
  Vector sigma_star;
  double objective_at_star = 0.0;
  SolveMethod method = SolveMethod::linear_system;
  double residual = 0.0;  // ||grad f(x_star)||
};

namespace detail {

inline OracleSolution finish_solution(const ProblemSpec& p, Vector x, SolveMethod method) {
  OracleSolution sol;
  sol.sigma_star = sigma(x, p);
  sol.objective_at_star = global_objective(x, p);
  sol.residual = full_gradient(x, p).norm();
  sol.method = method;
  sol.x_star = std::move(x);
  if (!(sol.residual < kOracleResidualLimit))
    throw ConvergenceError("oracle residual " + text::format_double(sol.residual) + " exceeds 1e-8");
  return sol;
}

}  // namespace detail

/// Solves H x = -g for the assembled quadratic stationarity system.
inline OracleSolution solve_linear_system(const ProblemSpec& p) {
  const auto sys = assemble_quadratic_system(p);
  Eigen::LDLT<Matrix> ldlt(sys.hessian);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw ConvergenceError("quadratic Hessian is not positive definite");
  Vector x = ldlt.solve(-sys.gradient_at_zero);
  // One step of iterative refinement.
  x += ldlt.solve(-(sys.hessian * x + sys.gradient_at_zero));
  return detail::finish_solution(p, std::move(x), SolveMethod::linear_system);
}

struct GradientDescentOptions {
  double gradient_tolerance = 1e-10;
  std::size_t max_iters = 1'000'000;
};

/// x <- x - grad f(x) / l1 from the origin until ||grad f|| < tolerance.
inline OracleSolution solve_gradient_descent(const ProblemSpec& p, GradientDescentOptions opts = {}) {
  const Constants c = resolve_constants(p);
  const double step = 1.0 / c.l1;
  Vector x = Vector::Zero(p.total_dim());
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    const Vector g = full_gradient(x, p);
    if (!g.allFinite()) throw ConvergenceError("centralized gradient descent diverged");
    if (g.norm() < opts.gradient_tolerance) return detail::finish_solution(p, std::move(x), SolveMethod::centralized_gd);
    x -= step * g;
  }
  throw ConvergenceError("centralized gradient descent did not converge within " + std::to_string(opts.max_iters) +
                         " iterations");
}

/// Linear system for quadratic problems, gradient descent otherwise.
inline OracleSolution centralized_solve(const ProblemSpec& p) {
  if (p.quadratic()) return solve_linear_system(p);
  return solve_gradient_descent(p);
}

/// Central differences of the global objective, step 1e-6 * max(1, |x_j|).
inline Vector fd_gradient(const ProblemSpec& p, const Vector& x) {
  p.check_stacked(x);
  return detail::central_difference([&](const Vector& v) { return global_objective(v, p); }, x);
}

/// Each agent stationary in its own objective only:
///   d f_1/d x_1 = 5/2 x_1 + 1/2 x_2 - 2 = 0
///   d f_2/d x_2 = 1/2 x_1 + 5/2 x_2 - 4 = 0
inline Eigen::Vector2d nash_solve_example1() {
  Eigen::Matrix2d m;
  m << 2.5, 0.5, 0.5, 2.5;
  const Eigen::Vector2d rhs(2.0, 4.0);
  return m.partialPivLu().solve(rhs);
}

inline void write_oracle(std::ostream& out, const OracleSolution& s) {
  out << "method=" << to_string(s.method) << '\n'
      << "x_star=" << text::format_vector(s.x_star) << '\n'
      << "sigma_star=" << text::format_vector(s.sigma_star) << '\n'
      << "objective=" << text::format_double(s.objective_at_star) << '\n'
      << "residual=" << text::format_double(s.residual) << '\n';
}

inline OracleSolution read_oracle(std::istream& in) {
  const auto doc = text::parse_key_values(in);
  OracleSolution s;
  const auto& method = doc.at("method");
  if (method == "linear-system") {
    s.method = SolveMethod::linear_system;
  } else if (method == "centralized-gd") {
    s.method = SolveMethod::centralized_gd;
  } else {
    throw FormatError("unknown oracle method '" + method + "'");
  }
  s.x_star = text::parse_vector(doc.at("x_star"));
  s.sigma_star = text::parse_vector(doc.at("sigma_star"));
  s.objective_at_star = text::parse_double(doc.at("objective"));
  s.residual = text::parse_double(doc.at("residual"));
  return s;
}

inline OracleSolution load_oracle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read oracle file '" + path + "'");
  return read_oracle(in);
}

}  // namespace dgt
