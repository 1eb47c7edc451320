// Aggregative optimization problems
//
//   minimize  f(x) = sum_i f_i(x_i, sigma(x)),   sigma(x) = (1/N) sum_i phi_i(x_i)
//
// described through per-agent evaluators. Nothing here ever hands agent i's
// functions another agent's decision vector.
#pragma once

#include "dgt/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace dgt {

enum class Provenance { analytic, estimated };

inline std::string to_string(Provenance p) { return p == Provenance::analytic ? "analytic" : "estimated"; }

/// mu: strong convexity of f; l1: smoothness of f and of the composite
/// gradient map; l2: Lipschitz constant of grad_2 f; l3: bound on ||grad phi_i||.
struct Constants {
  double mu = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;

  struct {
    Provenance mu = Provenance::analytic;
    Provenance l1 = Provenance::analytic;
    Provenance l2 = Provenance::analytic;
    Provenance l3 = Provenance::analytic;
  } provenance;

  void check() const {
    if (!(mu > 0.0 && l1 > 0.0 && l2 > 0.0 && l3 > 0.0))
      throw ConstantsError("constants must all be positive");
    if (mu > l1) throw ConstantsError("mu must not exceed l1");
  }
};

/// Agent-local evaluators. `grad_phi` returns the n_i x d Jacobian transpose,
/// applied to a d-vector as grad_phi(x_i) * y_i.
struct AgentFunctions {
  int dim = 0;
  std::function<Vector(const Vector&)> phi;
  std::function<Matrix(const Vector&)> grad_phi;
  std::function<double(const Vector&, const Vector&)> f;
  std::function<Vector(const Vector&, const Vector&)> grad1_f;
  std::function<Vector(const Vector&, const Vector&)> grad2_f;
};

/// f_i(x_i, s) = 1/2 z^T H z + g^T z + c with z = (x_i, s), phi_i(x_i) = B x_i + b.
struct QuadraticAgent {
  Matrix hessian;
  Vector linear;
  double constant = 0.0;
  Matrix phi_map;  // d x n_i
  Vector phi_offset;

  int dim() const { return static_cast<int>(phi_map.cols()); }
  int agg_dim() const { return static_cast<int>(phi_map.rows()); }
};

namespace detail {

inline double fd_step(double v) { return 1e-6 * std::max(1.0, std::abs(v)); }

template <class F>
Vector central_difference(const F& scalar_fn, const Vector& at) {
  Vector g(at.size());
  Vector probe = at;
  for (Eigen::Index k = 0; k < at.size(); ++k) {
    const double h = fd_step(at[k]);
    probe[k] = at[k] + h;
    const double up = scalar_fn(probe);
    probe[k] = at[k] - h;
    const double down = scalar_fn(probe);
    probe[k] = at[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace detail

class ProblemSpec {
 public:
  /// Missing gradient evaluators are replaced by central-difference fallbacks
  /// and the problem is flagged (see uses_fd_fallback()).
  ProblemSpec(std::string name, int agg_dim, std::vector<AgentFunctions> agents,
              std::optional<Constants> constants = std::nullopt,
              std::optional<std::vector<QuadraticAgent>> quadratic = std::nullopt)
      : name_(std::move(name)), agg_dim_(agg_dim), agents_(std::move(agents)),
        constants_(constants), quadratic_(std::move(quadratic)) {
    if (agg_dim_ < 1) throw DimensionError("aggregate dimension must be positive");
    if (agents_.empty()) throw DimensionError("problem needs at least one agent");
    offsets_.reserve(agents_.size() + 1);
    offsets_.push_back(0);
    for (auto& a : agents_) {
      if (a.dim < 1) throw DimensionError("local dimension must be positive");
      if (!a.phi || !a.f) throw std::invalid_argument("phi and f evaluators are required");
      fill_fallbacks(a);
      offsets_.push_back(offsets_.back() + a.dim);
    }
    if (constants_) constants_->check();
    if (quadratic_ && quadratic_->size() != agents_.size())
      throw DimensionError("quadratic data must cover every agent");
  }

  const std::string& name() const { return name_; }
  int n_agents() const { return static_cast<int>(agents_.size()); }
  int agg_dim() const { return agg_dim_; }
  int local_dim(int i) const { return agents_[static_cast<std::size_t>(i)].dim; }
  int total_dim() const { return static_cast<int>(offsets_.back()); }
  Eigen::Index offset(int i) const { return offsets_[static_cast<std::size_t>(i)]; }
  const AgentFunctions& agent(int i) const { return agents_[static_cast<std::size_t>(i)]; }
  const std::optional<Constants>& constants() const { return constants_; }
  const std::optional<std::vector<QuadraticAgent>>& quadratic() const { return quadratic_; }
  bool uses_fd_fallback() const { return fd_fallback_; }

  auto block(const Vector& x, int i) const { return x.segment(offset(i), local_dim(i)); }

  void check_stacked(const Vector& x) const {
    if (x.size() != total_dim())
      throw DimensionError("stacked vector has dimension " + std::to_string(x.size()) + ", expected " +
                           std::to_string(total_dim()));
  }

  /// Returns a copy whose agent evaluators are replaced by `wrap(i, fns)`.
  /// Used to instrument evaluator calls.
  template <class Wrap>
  ProblemSpec with_wrapped_agents(Wrap&& wrap) const {
    std::vector<AgentFunctions> wrapped;
    wrapped.reserve(agents_.size());
    for (int i = 0; i < n_agents(); ++i) wrapped.push_back(wrap(i, agent(i)));
    ProblemSpec copy(name_, agg_dim_, std::move(wrapped), constants_, quadratic_);
    copy.fd_fallback_ = fd_fallback_;
    return copy;
  }

 private:
  void fill_fallbacks(AgentFunctions& a) {
    const int d = agg_dim_;
    if (!a.grad1_f) {
      fd_fallback_ = true;
      a.grad1_f = [f = a.f](const Vector& x, const Vector& s) {
        return detail::central_difference([&](const Vector& p) { return f(p, s); }, x);
      };
    }
    if (!a.grad2_f) {
      fd_fallback_ = true;
      a.grad2_f = [f = a.f](const Vector& x, const Vector& s) {
        return detail::central_difference([&](const Vector& p) { return f(x, p); }, s);
      };
    }
    if (!a.grad_phi) {
      fd_fallback_ = true;
      a.grad_phi = [phi = a.phi, d](const Vector& x) {
        Matrix jac(x.size(), d);
        for (int l = 0; l < d; ++l)
          jac.col(l) = detail::central_difference([&](const Vector& p) { return phi(p)[l]; }, x);
        return jac;
      };
    }
  }

  std::string name_;
  int agg_dim_;
  std::vector<AgentFunctions> agents_;
  std::optional<Constants> constants_;
  std::optional<std::vector<QuadraticAgent>> quadratic_;
  std::vector<Eigen::Index> offsets_;
  bool fd_fallback_ = false;
};

inline Vector sigma(const Vector& x, const ProblemSpec& p) {
  p.check_stacked(x);
  Vector acc = Vector::Zero(p.agg_dim());
  for (int i = 0; i < p.n_agents(); ++i) acc += p.agent(i).phi(p.block(x, i));
  return acc / static_cast<double>(p.n_agents());
}

inline double global_objective(const Vector& x, const ProblemSpec& p) {
  const Vector s = sigma(x, p);
  double total = 0.0;
  for (int i = 0; i < p.n_agents(); ++i) total += p.agent(i).f(p.block(x, i), s);
  return total;
}

/// Chain rule through sigma: block i is
///   grad1 f_i(x_i, s) + grad phi_i(x_i) * (1/N) sum_j grad2 f_j(x_j, s).
inline Vector full_gradient(const Vector& x, const ProblemSpec& p) {
  const Vector s = sigma(x, p);
  Vector mean_grad2 = Vector::Zero(p.agg_dim());
  for (int j = 0; j < p.n_agents(); ++j) mean_grad2 += p.agent(j).grad2_f(p.block(x, j), s);
  mean_grad2 /= static_cast<double>(p.n_agents());
  Vector g(p.total_dim());
  for (int i = 0; i < p.n_agents(); ++i) {
    const Vector xi = p.block(x, i);
    g.segment(p.offset(i), p.local_dim(i)) =
        p.agent(i).grad1_f(xi, s) + p.agent(i).grad_phi(xi) * mean_grad2;
  }
  return g;
}

/// Exact Hessian and gradient-at-zero of a quadratic problem, assembled from
/// the per-agent blocks (independent of the evaluator closures).
struct QuadraticSystem {
  Matrix hessian;
  Vector gradient_at_zero;
  double value_at_zero = 0.0;
};

inline QuadraticSystem assemble_quadratic_system(const ProblemSpec& p) {
  if (!p.quadratic()) throw std::invalid_argument("problem '" + p.name() + "' is not quadratic");
  const auto& agents = *p.quadratic();
  const int n = p.total_dim();
  const int d = p.agg_dim();
  const double inv_n = 1.0 / static_cast<double>(p.n_agents());
  // sigma(x) = S x + s0
  Matrix s_map = Matrix::Zero(d, n);
  Vector s0 = Vector::Zero(d);
  for (int i = 0; i < p.n_agents(); ++i) {
    s_map.block(0, p.offset(i), d, p.local_dim(i)) = inv_n * agents[static_cast<std::size_t>(i)].phi_map;
    s0 += inv_n * agents[static_cast<std::size_t>(i)].phi_offset;
  }
  QuadraticSystem sys{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
  for (int i = 0; i < p.n_agents(); ++i) {
    const auto& q = agents[static_cast<std::size_t>(i)];
    const int ni = p.local_dim(i);
    // z_i = T x + t
    Matrix t_map = Matrix::Zero(ni + d, n);
    t_map.block(0, p.offset(i), ni, ni).setIdentity();
    t_map.bottomRows(d) = s_map;
    Vector t = Vector::Zero(ni + d);
    t.tail(d) = s0;
    sys.hessian += t_map.transpose() * q.hessian * t_map;
    sys.gradient_at_zero += t_map.transpose() * (q.hessian * t + q.linear);
    sys.value_at_zero += 0.5 * t.dot(q.hessian * t) + q.linear.dot(t) + q.constant;
  }
  sys.hessian = 0.5 * (sys.hessian + sys.hessian.transpose());
  return sys;
}

/// Constants read off the exact quadratic blocks. Returns nullopt when the
/// problem is not strongly convex or a constant degenerates to zero.
inline std::optional<Constants> analytic_quadratic_constants(const ProblemSpec& p) {
  const auto sys = assemble_quadratic_system(p);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sys.hessian, Eigen::EigenvaluesOnly);
  Constants c;
  c.mu = eig.eigenvalues().minCoeff();
  c.l1 = eig.eigenvalues().maxCoeff();
  const int d = p.agg_dim();
  for (const auto& q : *p.quadratic()) {
    const int ni = q.dim();
    const Matrix h_sx = q.hessian.block(ni, 0, d, ni);
    const Matrix h_ss = q.hessian.block(ni, ni, d, d);
    const auto norm2 = [](const Matrix& m) {
      return m.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
    };
    c.l2 = std::max({c.l2, norm2(h_sx), norm2(h_ss)});
    c.l3 = std::max(c.l3, norm2(q.phi_map));
  }
  if (!(c.mu > 0.0 && c.l2 > 0.0 && c.l3 > 0.0)) return std::nullopt;
  return c;
}

/// Builds closures for a generic quadratic problem and attaches analytic
/// constants when they are well defined.
inline ProblemSpec make_quadratic_problem(std::string name, std::vector<QuadraticAgent> agents) {
  if (agents.empty()) throw DimensionError("problem needs at least one agent");
  const int d = agents.front().agg_dim();
  std::vector<AgentFunctions> fns;
  for (const auto& q : agents) {
    const int ni = q.dim();
    if (q.agg_dim() != d || q.phi_offset.size() != d) throw DimensionError("inconsistent aggregate dimension");
    if (q.hessian.rows() != ni + d || q.hessian.cols() != ni + d || q.linear.size() != ni + d)
      throw DimensionError("quadratic block has wrong shape");
    auto shared = std::make_shared<const QuadraticAgent>(q);
    AgentFunctions a;
    a.dim = ni;
    a.phi = [shared](const Vector& x) -> Vector { return shared->phi_map * x + shared->phi_offset; };
    a.grad_phi = [shared](const Vector&) -> Matrix { return shared->phi_map.transpose(); };
    const auto stack = [ni, d](const Vector& x, const Vector& s) {
      Vector z(ni + d);
      z << x, s;
      return z;
    };
    a.f = [shared, stack](const Vector& x, const Vector& s) {
      const Vector z = stack(x, s);
      return 0.5 * z.dot(shared->hessian * z) + shared->linear.dot(z) + shared->constant;
    };
    a.grad1_f = [shared, stack, ni](const Vector& x, const Vector& s) -> Vector {
      const Vector z = stack(x, s);
      return (shared->hessian * z + shared->linear).head(ni);
    };
    a.grad2_f = [shared, stack, d](const Vector& x, const Vector& s) -> Vector {
      const Vector z = stack(x, s);
      return (shared->hessian * z + shared->linear).tail(d);
    };
    fns.push_back(std::move(a));
  }
  ProblemSpec provisional(name, d, fns, std::nullopt, agents);
  auto constants = analytic_quadratic_constants(provisional);
  return ProblemSpec(std::move(name), d, std::move(fns), constants, std::move(agents));
}

struct SampleBox {
  double lo = -1.0;
  double hi = 1.0;
};

struct ConstantsEstimate {
  Constants constants;
  std::vector<std::string> warnings;
};

/// Monte-Carlo lower bounds on l1, l2, l3 from sampled difference quotients and
/// a secant estimate of mu, over points drawn uniformly from the box (applied
/// to every coordinate of x and of the per-agent aggregate arguments).
inline ConstantsEstimate estimate_constants(const ProblemSpec& p, SampleBox box, int n_samples,
                                            std::uint64_t seed = 0) {
  if (!(box.hi > box.lo)) throw std::invalid_argument("degenerate sample box");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(box.lo, box.hi);
  const auto draw = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = unif(rng);
    return v;
  };
  const int n = p.total_dim();
  const int d = p.agg_dim();
  const int na = p.n_agents();

  ConstantsEstimate est;
  est.constants.provenance = {Provenance::estimated, Provenance::estimated, Provenance::estimated,
                              Provenance::estimated};
  double mu = std::numeric_limits<double>::infinity();
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Vector x = draw(n);
    const Vector xp = draw(n);
    const Vector dx = x - xp;
    const double dxn = dx.norm();
    if (dxn > 0.0) {
      const Vector dg = full_gradient(x, p) - full_gradient(xp, p);
      l1 = std::max(l1, dg.norm() / dxn);
      mu = std::min(mu, dg.dot(dx) / (dxn * dxn));
    }
    const Vector y = draw(static_cast<Eigen::Index>(na) * d);
    const Vector yp = draw(static_cast<Eigen::Index>(na) * d);
    double diff2 = 0.0;
    for (int i = 0; i < na; ++i) {
      const Vector gi = p.agent(i).grad2_f(p.block(x, i), y.segment(i * d, d));
      const Vector gip = p.agent(i).grad2_f(p.block(xp, i), yp.segment(i * d, d));
      diff2 += (gi - gip).squaredNorm();
      const Matrix jac = p.agent(i).grad_phi(p.block(x, i));
      l3 = std::max(l3, Eigen::JacobiSVD<Matrix>(jac).singularValues()(0));
    }
    const double denom = dxn + (y - yp).norm();
    if (denom > 0.0) l2 = std::max(l2, std::sqrt(diff2) / denom);
  }
  est.constants.mu = std::max(0.0, mu);
  est.constants.l1 = l1;
  est.constants.l2 = l2;
  est.constants.l3 = l3;
  if (!(est.constants.mu > 0.0)) est.warnings.push_back("mu estimate is not positive: objective may not be strongly convex");
  if (!(l1 > 0.0)) est.warnings.push_back("l1 estimate is zero: gradient appears constant");
  if (!(l2 > 0.0)) est.warnings.push_back("l2 estimate is zero: objectives do not depend on the aggregate");
  if (!(l3 > 0.0)) est.warnings.push_back("l3 estimate is zero: aggregate maps are constant");
  if (p.uses_fd_fallback()) est.warnings.push_back("finite-difference gradient fallbacks in use: estimates carry truncation error");
  return est;
}

/// Analytic constants when attached, otherwise a Monte-Carlo estimate.
inline Constants resolve_constants(const ProblemSpec& p, SampleBox box = {-10.0, 10.0}, int n_samples = 2000) {
  if (p.constants()) return *p.constants();
  auto est = estimate_constants(p, box, n_samples);
  est.constants.check();
  return est.constants;
}

}  // namespace dgt
