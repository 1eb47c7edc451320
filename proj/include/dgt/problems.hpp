// Built-in problem instances and the text format for custom quadratic problems.
#pragma once

#include "dgt/model.hpp"

#include <array>
#include <fstream>
#include <string>
#include <vector>

namespace dgt {

/// Two scalar agents, identity phi:
///   f_1 = (x_1 - 1)^2 + sigma^2,   f_2 = (x_2 - 2)^2 + sigma^2.
/// Cooperative optimum (1/4, 5/4); Nash equilibrium (1/2, 3/2).
inline ProblemSpec builtin_example1() {
  const std::array<double, 2> targets{1.0, 2.0};
  std::vector<AgentFunctions> agents;
  std::vector<QuadraticAgent> quad;
  for (double c : targets) {
    AgentFunctions a;
    a.dim = 1;
    a.phi = [](const Vector& x) -> Vector { return x; };
    a.grad_phi = [](const Vector&) -> Matrix { return Matrix::Identity(1, 1); };
    a.f = [c](const Vector& x, const Vector& s) { return (x[0] - c) * (x[0] - c) + s[0] * s[0]; };
    a.grad1_f = [c](const Vector& x, const Vector&) -> Vector { return Vector::Constant(1, 2.0 * (x[0] - c)); };
    a.grad2_f = [](const Vector&, const Vector& s) -> Vector { return 2.0 * s; };
    agents.push_back(std::move(a));

    QuadraticAgent q;
    q.hessian = 2.0 * Matrix::Identity(2, 2);
    q.linear = Vector(2);
    q.linear << -2.0 * c, 0.0;
    q.constant = c * c;
    q.phi_map = Matrix::Identity(1, 1);
    q.phi_offset = Vector::Zero(1);
    quad.push_back(std::move(q));
  }
  ProblemSpec provisional("example1", 1, agents, std::nullopt, quad);
  return ProblemSpec("example1", 1, std::move(agents), analytic_quadratic_constants(provisional), std::move(quad));
}

struct PlacementParameters {
  std::vector<double> gammas;
  std::vector<Eigen::Vector2d> anchors;
};

/// Five free entities in the plane, weights gamma_i = i, fixed anchors r_i.
inline PlacementParameters placement_parameters() {
  return {{1.0, 2.0, 3.0, 4.0, 5.0},
          {Eigen::Vector2d(3, 5), Eigen::Vector2d(6, 9), Eigen::Vector2d(9, 8), Eigen::Vector2d(6, 2),
           Eigen::Vector2d(9, 2)}};
}

/// f_i(x_i, s) = gamma_i ||x_i - r_i||^2 + ||x_i - s||^2 with identity phi.
inline ProblemSpec builtin_placement(const PlacementParameters& params = placement_parameters()) {
  if (params.gammas.size() != params.anchors.size()) throw DimensionError("one gamma per anchor required");
  std::vector<AgentFunctions> agents;
  std::vector<QuadraticAgent> quad;
  for (std::size_t i = 0; i < params.gammas.size(); ++i) {
    const double gamma = params.gammas[i];
    const Vector r = params.anchors[i];
    AgentFunctions a;
    a.dim = 2;
    a.phi = [](const Vector& x) -> Vector { return x; };
    a.grad_phi = [](const Vector&) -> Matrix { return Matrix::Identity(2, 2); };
    a.f = [gamma, r](const Vector& x, const Vector& s) {
      return gamma * (x - r).squaredNorm() + (x - s).squaredNorm();
    };
    a.grad1_f = [gamma, r](const Vector& x, const Vector& s) -> Vector {
      return 2.0 * gamma * (x - r) + 2.0 * (x - s);
    };
    a.grad2_f = [](const Vector& x, const Vector& s) -> Vector { return 2.0 * (s - x); };
    agents.push_back(std::move(a));

    QuadraticAgent q;
    q.hessian = Matrix::Zero(4, 4);
    q.hessian.topLeftCorner(2, 2) = 2.0 * (gamma + 1.0) * Matrix::Identity(2, 2);
    q.hessian.topRightCorner(2, 2) = -2.0 * Matrix::Identity(2, 2);
    q.hessian.bottomLeftCorner(2, 2) = -2.0 * Matrix::Identity(2, 2);
    q.hessian.bottomRightCorner(2, 2) = 2.0 * Matrix::Identity(2, 2);
    q.linear = Vector::Zero(4);
    q.linear.head(2) = -2.0 * gamma * r;
    q.constant = gamma * r.squaredNorm();
    q.phi_map = Matrix::Identity(2, 2);
    q.phi_offset = Vector::Zero(2);
    quad.push_back(std::move(q));
  }
  ProblemSpec provisional("placement", 2, agents, std::nullopt, quad);
  return ProblemSpec("placement", 2, std::move(agents), analytic_quadratic_constants(provisional), std::move(quad));
}

/// Key=value quadratic problem:
///
///   n_agents=2
///   agg_dim=1
///   agent0.hessian=2 0; 0 2     (n_i + d square, rows separated by ';')
///   agent0.linear=-2 0          (n_i + d)
///   agent0.constant=1           (optional, default 0)
///   agent0.phi=1                (d x n_i, default identity when n_i == d)
///   agent0.phi_offset=0         (optional, default zero)
inline ProblemSpec parse_quadratic_problem(std::istream& in, std::string name = "custom") {
  const auto doc = text::parse_key_values(in);
  if (!doc.bare_lines.empty()) throw FormatError("unexpected line '" + doc.bare_lines.front() + "'");
  const auto n_agents = text::parse_integer(doc.at("n_agents"));
  const auto d = text::parse_integer(doc.at("agg_dim"));
  if (n_agents < 1 || d < 1) throw FormatError("n_agents and agg_dim must be positive");
  std::vector<QuadraticAgent> agents;
  for (long long i = 0; i < n_agents; ++i) {
    const std::string pre = "agent" + std::to_string(i) + ".";
    QuadraticAgent q;
    q.hessian = text::parse_matrix(doc.at(pre + "hessian"));
    q.linear = text::parse_vector(doc.at(pre + "linear"));
    q.constant = doc.has(pre + "constant") ? text::parse_double(doc.at(pre + "constant")) : 0.0;
    const auto ni = q.hessian.rows() - d;
    if (ni < 1) throw FormatError(pre + "hessian is too small for agg_dim");
    if (doc.has(pre + "phi")) {
      q.phi_map = text::parse_matrix(doc.at(pre + "phi"));
    } else if (ni == d) {
      q.phi_map = Matrix::Identity(d, d);
    } else {
      throw FormatError(pre + "phi is required when the local dimension differs from agg_dim");
    }
    if (q.phi_map.rows() != d || q.phi_map.cols() != ni) throw FormatError(pre + "phi must be agg_dim x n_i");
    q.phi_offset = doc.has(pre + "phi_offset") ? text::parse_vector(doc.at(pre + "phi_offset")) : Vector::Zero(d);
    if (q.hessian.cols() != q.hessian.rows() || q.linear.size() != q.hessian.rows() || q.phi_offset.size() != d)
      throw FormatError(pre + "block shapes are inconsistent");
    if (!q.hessian.isApprox(q.hessian.transpose())) throw FormatError(pre + "hessian must be symmetric");
    agents.push_back(std::move(q));
  }
  return make_quadratic_problem(std::move(name), std::move(agents));
}

inline ProblemSpec load_quadratic_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read problem file '" + path + "'");
  return parse_quadratic_problem(in, path);
}

/// Built-in names: "example1", "placement".
inline std::optional<ProblemSpec> builtin_problem(std::string_view name) {
  if (name == "example1") return builtin_example1();
  if (name == "placement") return builtin_placement();
  return std::nullopt;
}

}  // namespace dgt
