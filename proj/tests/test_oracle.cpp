#include "dgt/oracle.hpp"
#include "dgt/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace dgt;

namespace {

/// Same objective as the built-in placement problem but without the attached
/// quadratic data, so the solver must fall back to gradient descent.
ProblemSpec opaque_placement() {
  const auto base = builtin_placement();
  std::vector<AgentFunctions> agents;
  for (int i = 0; i < base.n_agents(); ++i) agents.push_back(base.agent(i));
  return ProblemSpec("opaque", 2, agents, base.constants());
}

}  // namespace

TEST(CentralizedSolve, RoutesAgree) {
  for (const auto& p : {builtin_example1(), builtin_placement()}) {
    const auto direct = solve_linear_system(p);
    const auto gd = solve_gradient_descent(p);
    EXPECT_EQ(direct.method, SolveMethod::linear_system);
    EXPECT_EQ(gd.method, SolveMethod::centralized_gd);
    EXPECT_LT(direct.residual, 1e-10);
    EXPECT_LT(gd.residual, 1e-10);
    EXPECT_LT((direct.x_star - gd.x_star).norm(), 1e-7) << p.name();
  }
}

TEST(CentralizedSolve, PicksLinearSystemWhenQuadraticDataIsAttached) {
  EXPECT_EQ(centralized_solve(builtin_placement()).method, SolveMethod::linear_system);
  EXPECT_EQ(centralized_solve(opaque_placement()).method, SolveMethod::centralized_gd);
}

TEST(CentralizedSolve, Example1Optimum) {
  const auto s = centralized_solve(builtin_example1());
  EXPECT_NEAR(s.x_star[0], 0.25, 1e-12);
  EXPECT_NEAR(s.x_star[1], 1.25, 1e-12);
  EXPECT_NEAR(s.sigma_star[0], 0.75, 1e-12);
  EXPECT_NEAR(s.objective_at_star, 2.25, 1e-12);
}

TEST(CentralizedSolve, PlacementOptimum) {
  const auto s = centralized_solve(builtin_placement());
  const double expected[10] = {4.9577, 5.0023, 6.3052, 7.6682, 8.4789, 7.2512, 6.1831, 2.6009, 8.6526, 2.5008};
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(s.x_star[k], expected[k], 5e-5) << k;
  EXPECT_NEAR(s.sigma_star[0], 6.9155, 5e-5);
  EXPECT_NEAR(s.sigma_star[1], 5.0047, 5e-5);
}

TEST(CentralizedSolve, SingleAgentWithoutAggregateDependence) {
  // f(x, s) = ||x - c||^2 + 0 * s, so x* = c.
  std::vector<AgentFunctions> fns;
  AgentFunctions a;
  a.dim = 2;
  a.phi = [](const Vector&) -> Vector { return Vector::Zero(2); };
  a.grad_phi = [](const Vector&) -> Matrix { return Matrix::Zero(2, 2); };
  a.f = [](const Vector& x, const Vector&) { return (x - Vector{{1.0, -3.0}}).squaredNorm(); };
  a.grad1_f = [](const Vector& x, const Vector&) -> Vector { return 2.0 * (x - Vector{{1.0, -3.0}}); };
  a.grad2_f = [](const Vector&, const Vector&) -> Vector { return Vector::Zero(2); };
  fns.push_back(a);
  Constants c;
  c.mu = c.l1 = 2.0;
  c.l2 = c.l3 = 1.0;
  const ProblemSpec p("single", 2, fns, c);
  const auto s = solve_gradient_descent(p);
  EXPECT_NEAR(s.x_star[0], 1.0, 1e-10);
  EXPECT_NEAR(s.x_star[1], -3.0, 1e-10);
  EXPECT_NEAR(s.objective_at_star, 0.0, 1e-18);
}

TEST(CentralizedSolve, LinearSystemRequiresQuadraticData) {
  EXPECT_THROW(solve_linear_system(opaque_placement()), std::invalid_argument);
}

TEST(FdGradient, Examples) {
  const auto p = builtin_example1();
  const Vector g = fd_gradient(p, Vector::Zero(2));
  EXPECT_NEAR(g[0], -2.0, 1e-7);
  EXPECT_NEAR(g[1], -4.0, 1e-7);
  EXPECT_LT(fd_gradient(p, Vector{{0.25, 1.25}}).norm(), 1e-7);
  EXPECT_THROW(fd_gradient(p, Vector::Zero(3)), DimensionError);
}

TEST(Nash, Example1EquilibriumDiffersFromOptimum) {
  const Eigen::Vector2d nash = nash_solve_example1();
  EXPECT_NEAR(nash[0], 0.5, 1e-14);
  EXPECT_NEAR(nash[1], 1.5, 1e-14);
  // Each agent's own partial gradient vanishes at the equilibrium...
  const auto p = builtin_example1();
  const double s = nash.mean();
  for (int i = 0; i < 2; ++i) {
    const Vector xi = Vector::Constant(1, nash[i]);
    const Vector si = Vector::Constant(1, s);
    const double own = p.agent(i).grad1_f(xi, si)[0] + p.agent(i).grad2_f(xi, si)[0] / 2.0;
    EXPECT_NEAR(own, 0.0, 1e-14);
  }
  // ...but the cooperative gradient does not.
  EXPECT_GT(full_gradient(Vector(nash), p).norm(), 0.5);
  const auto opt = centralized_solve(p);
  EXPECT_NEAR((Vector(nash) - opt.x_star).norm(), 0.25 * std::sqrt(2.0), 1e-12);
  EXPECT_GT(global_objective(Vector(nash), p), opt.objective_at_star);
}

TEST(OracleFile, RoundTrip) {
  const auto s = centralized_solve(builtin_placement());
  std::stringstream buf;
  write_oracle(buf, s);
  const auto back = read_oracle(buf);
  EXPECT_EQ(back.method, s.method);
  EXPECT_EQ(back.x_star, s.x_star);
  EXPECT_EQ(back.sigma_star, s.sigma_star);
  EXPECT_EQ(back.objective_at_star, s.objective_at_star);
  EXPECT_EQ(back.residual, s.residual);
}

TEST(OracleFile, Errors) {
  std::istringstream missing("method=linear-system\n");
  EXPECT_THROW(read_oracle(missing), FormatError);
  std::istringstream bad_method("method=magic\nx_star=1\nsigma_star=1\nobjective=0\nresidual=0\n");
  EXPECT_THROW(read_oracle(bad_method), FormatError);
  EXPECT_THROW(load_oracle("/nonexistent/oracle.txt"), FormatError);
}
