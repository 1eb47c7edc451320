// Distributed gradient tracking: every agent i keeps (x_i, sigma_i, y_i) and per
// synchronous round performs
//
//   x_i     <- x_i - alpha * (grad1 f_i(x_i, sigma_i) + grad phi_i(x_i) y_i)
//   sigma_i <- sum_j a_ij sigma_j + phi_i(x_i^+) - phi_i(x_i)
//   y_i     <- sum_j a_ij y_j + grad2 f_i(x_i^+, sigma_i^+) - grad2 f_i(x_i, sigma_i)
//
// with sigma_j, y_j read from the previous round's buffers.
#pragma once

#include "dgt/common.hpp"
#include "dgt/executor.hpp"
#include "dgt/graph.hpp"
#include "dgt/model.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace dgt {

/// Divergence guard on ||x_k||.
inline constexpr double kDivergenceMagnitude = 1e12;

struct AgentState {
  Vector x;
  Vector sigma;
  Vector y;
  // The agent's own evaluations at (x, sigma), reused by the next round's
  // increments.
  Vector phi_x;
  Vector grad2;
};

struct SwarmState {
  std::size_t k = 0;
  std::vector<AgentState> agents;

  Vector stacked_x() const {
    Eigen::Index n = 0;
    for (const auto& a : agents) n += a.x.size();
    Vector out(n);
    Eigen::Index off = 0;
    for (const auto& a : agents) {
      out.segment(off, a.x.size()) = a.x;
      off += a.x.size();
    }
    return out;
  }
};

inline SwarmState make_state(const ProblemSpec& p, const Vector& x, const std::vector<Vector>& sigmas,
                             const std::vector<Vector>& ys, std::size_t k = 0) {
  p.check_stacked(x);
  const auto n = static_cast<std::size_t>(p.n_agents());
  if (sigmas.size() != n || ys.size() != n) throw DimensionError("one sigma and one y per agent required");
  SwarmState s;
  s.k = k;
  s.agents.resize(n);
  for (int i = 0; i < p.n_agents(); ++i) {
    auto& a = s.agents[static_cast<std::size_t>(i)];
    a.x = p.block(x, i);
    a.sigma = sigmas[static_cast<std::size_t>(i)];
    a.y = ys[static_cast<std::size_t>(i)];
    if (a.sigma.size() != p.agg_dim() || a.y.size() != p.agg_dim())
      throw DimensionError("sigma and y must have the aggregate dimension");
    a.phi_x = p.agent(i).phi(a.x);
    a.grad2 = p.agent(i).grad2_f(a.x, a.sigma);
  }
  return s;
}

/// sigma_i = phi_i(x_i), y_i = grad2 f_i(x_i, sigma_i).
inline SwarmState init(const ProblemSpec& p, const Vector& x0) {
  p.check_stacked(x0);
  SwarmState s;
  s.agents.resize(static_cast<std::size_t>(p.n_agents()));
  for (int i = 0; i < p.n_agents(); ++i) {
    auto& a = s.agents[static_cast<std::size_t>(i)];
    a.x = p.block(x0, i);
    a.phi_x = p.agent(i).phi(a.x);
    a.sigma = a.phi_x;
    a.grad2 = p.agent(i).grad2_f(a.x, a.sigma);
    a.y = a.grad2;
  }
  return s;
}

namespace detail {

inline void throw_first_bad(const std::vector<char>& bad, std::size_t k, const char* what) {
  for (std::size_t i = 0; i < bad.size(); ++i)
    if (bad[i])
      throw DivergenceError(k, i,
                            "non-finite " + std::string(what) + " at iteration " + std::to_string(k) + ", agent " +
                                std::to_string(i) + "; reduce the step size");
}

/// sum_j a_ij v_j over in-neighbors, j ascending.
template <class Get>
Vector mix(const Matrix& a, Eigen::Index i, Eigen::Index dim, Get&& get) {
  Vector acc = Vector::Zero(dim);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double w = a(i, j);
    if (w != 0.0) acc.noalias() += w * get(j);
  }
  return acc;
}

}  // namespace detail

template <AgentExecutor Exec = SequentialExecutor>
SwarmState step(const SwarmState& s, const WeightMatrix& w, const ProblemSpec& p, double alpha,
                const Exec& exec = {}) {
  const auto n = s.agents.size();
  if (static_cast<int>(n) != p.n_agents() || w.n_agents() != p.n_agents())
    throw DimensionError("state, weights and problem disagree on the number of agents");
  if (!(alpha > 0.0)) throw std::invalid_argument("step size must be positive");
  const Matrix& a = w.entries();
  const Eigen::Index d = p.agg_dim();

  SwarmState next;
  next.k = s.k + 1;
  next.agents.resize(n);
  std::vector<char> bad(n, 0);

  exec.for_each_agent(n, [&](std::size_t i) {
    const auto& cur = s.agents[i];
    const auto& fn = p.agent(static_cast<int>(i));
    auto& nx = next.agents[i];
    nx.x = cur.x - alpha * (fn.grad1_f(cur.x, cur.sigma) + fn.grad_phi(cur.x) * cur.y);
    bad[i] = !nx.x.allFinite();
  });
  detail::throw_first_bad(bad, s.k, "decision update");

  exec.for_each_agent(n, [&](std::size_t i) {
    const auto& cur = s.agents[i];
    auto& nx = next.agents[i];
    nx.phi_x = p.agent(static_cast<int>(i)).phi(nx.x);
    nx.sigma = detail::mix(a, static_cast<Eigen::Index>(i), d,
                           [&](Eigen::Index j) -> const Vector& { return s.agents[static_cast<std::size_t>(j)].sigma; });
    nx.sigma += nx.phi_x - cur.phi_x;
    bad[i] = !nx.sigma.allFinite();
  });
  detail::throw_first_bad(bad, s.k, "aggregate tracker");

  exec.for_each_agent(n, [&](std::size_t i) {
    const auto& cur = s.agents[i];
    auto& nx = next.agents[i];
    nx.grad2 = p.agent(static_cast<int>(i)).grad2_f(nx.x, nx.sigma);
    nx.y = detail::mix(a, static_cast<Eigen::Index>(i), d,
                       [&](Eigen::Index j) -> const Vector& { return s.agents[static_cast<std::size_t>(j)].y; });
    nx.y += nx.grad2 - cur.grad2;
    bad[i] = !nx.y.allFinite();
  });
  detail::throw_first_bad(bad, s.k, "gradient tracker");
  return next;
}

struct TrackingDeviation {
  double sigma = 0.0;  // max |mean sigma_i - mean phi_i(x_i)|
  double y = 0.0;      // max |mean y_i - mean grad2 f_i(x_i, sigma_i)|
};

inline TrackingDeviation tracking_deviation(const SwarmState& s) {
  const auto n = static_cast<double>(s.agents.size());
  const auto d = s.agents.front().sigma.size();
  Vector ds = Vector::Zero(d), dy = Vector::Zero(d);
  for (const auto& a : s.agents) {
    ds += a.sigma - a.phi_x;
    dy += a.y - a.grad2;
  }
  return {(ds / n).cwiseAbs().maxCoeff(), (dy / n).cwiseAbs().maxCoeff()};
}

/// ||v - J v|| over the stacked per-agent vectors selected by `get`.
template <class Get>
double consensus_residual(const SwarmState& s, Get&& get) {
  const auto n = static_cast<double>(s.agents.size());
  Vector mean = Vector::Zero(get(s.agents.front()).size());
  for (const auto& a : s.agents) mean += get(a);
  mean /= n;
  double sq = 0.0;
  for (const auto& a : s.agents) sq += (get(a) - mean).squaredNorm();
  return std::sqrt(sq);
}

struct RandomBox {
  double lo = 0.0;
  double hi = 10.0;
};

struct ExplicitStart {
  Vector x0;
};

struct RunConfig {
  double alpha = 0.0;
  std::size_t max_iters = 10000;
  double x_tolerance = 1e-10;
  std::uint64_t seed = 0;
  std::variant<RandomBox, ExplicitStart> init = RandomBox{};
  /// Known optimum; enables the err_x column.
  std::optional<Vector> x_star;
  bool record_states = false;
  /// Refuse weight matrices that fail validation.
  bool check_graph = true;

  void check() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
    if (!(x_tolerance > 0.0)) throw std::invalid_argument("x_tolerance must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
    if (const auto* box = std::get_if<RandomBox>(&init); box && !(box->hi > box->lo))
      throw std::invalid_argument("random init box must have lo < hi");
  }
};

struct TraceRecord {
  std::size_t k = 0;
  std::optional<double> err_x;
  double cons_sigma = 0.0;
  double cons_y = 0.0;
  std::optional<double> step_norm;  // ||x_k - x_{k-1}||, absent at k = 0
  double objective = 0.0;
  TrackingDeviation tracking;
};

struct Trace {
  std::vector<TraceRecord> records;
  SwarmState final_state;
  bool converged = false;
  /// Every state x_0 .. x_K when RunConfig::record_states is set.
  std::vector<SwarmState> states;

  std::size_t iterations() const { return records.empty() ? 0 : records.back().k; }
};

inline Vector initial_point(const ProblemSpec& p, const RunConfig& cfg) {
  if (const auto* e = std::get_if<ExplicitStart>(&cfg.init)) {
    p.check_stacked(e->x0);
    return e->x0;
  }
  const auto& box = std::get<RandomBox>(cfg.init);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(box.lo, box.hi);
  Vector x(p.total_dim());
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = unif(rng);
  return x;
}

namespace detail {

inline TraceRecord observe(const SwarmState& s, const ProblemSpec& p, const RunConfig& cfg,
                           std::optional<double> step_norm) {
  TraceRecord r;
  r.k = s.k;
  r.step_norm = step_norm;
  r.cons_sigma = consensus_residual(s, [](const AgentState& a) -> const Vector& { return a.sigma; });
  r.cons_y = consensus_residual(s, [](const AgentState& a) -> const Vector& { return a.y; });
  r.tracking = tracking_deviation(s);
  // Observer-side objective at sigma(x_k), rebuilt from each agent's phi_i(x_i).
  Vector agg = Vector::Zero(p.agg_dim());
  for (const auto& a : s.agents) agg += a.phi_x;
  agg /= static_cast<double>(s.agents.size());
  double obj = 0.0;
  for (std::size_t i = 0; i < s.agents.size(); ++i) obj += p.agent(static_cast<int>(i)).f(s.agents[i].x, agg);
  r.objective = obj;
  if (cfg.x_star) r.err_x = (s.stacked_x() - *cfg.x_star).norm();
  return r;
}

}  // namespace detail

/// Iterates until ||x_{k+1} - x_k|| < x_tolerance or max_iters rounds.
/// Throws DivergenceError on non-finite values or ||x_k|| > 1e12.
template <AgentExecutor Exec = SequentialExecutor>
Trace run(const ProblemSpec& p, const WeightMatrix& w, const RunConfig& cfg, const Exec& exec = {}) {
  cfg.check();
  if (w.n_agents() != p.n_agents()) throw DimensionError("weight matrix size does not match the number of agents");
  if (cfg.check_graph && !validate(w).ok()) throw GraphError("weight matrix fails validation");
  if (cfg.x_star) p.check_stacked(*cfg.x_star);

  Trace trace;
  SwarmState state = init(p, initial_point(p, cfg));
  trace.records.reserve(std::min<std::size_t>(cfg.max_iters + 1, 1u << 16));
  trace.records.push_back(detail::observe(state, p, cfg, std::nullopt));
  if (cfg.record_states) trace.states.push_back(state);

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    SwarmState next = step(state, w, p, cfg.alpha, exec);
    double step_sq = 0.0, norm_sq = 0.0;
    std::size_t worst = 0;
    double worst_norm = -1.0;
    for (std::size_t i = 0; i < next.agents.size(); ++i) {
      step_sq += (next.agents[i].x - state.agents[i].x).squaredNorm();
      const double bn = next.agents[i].x.squaredNorm();
      norm_sq += bn;
      if (bn > worst_norm) {
        worst_norm = bn;
        worst = i;
      }
    }
    if (std::sqrt(norm_sq) > kDivergenceMagnitude)
      throw DivergenceError(next.k, worst,
                            "iterate norm exceeded 1e12 at iteration " + std::to_string(next.k) + " (agent " +
                                std::to_string(worst) + "); step size " + text::format_double(cfg.alpha) +
                                " is too large");
    const double step_norm = std::sqrt(step_sq);
    state = std::move(next);
    trace.records.push_back(detail::observe(state, p, cfg, step_norm));
    if (cfg.record_states) trace.states.push_back(state);
    if (step_norm < cfg.x_tolerance) {
      trace.converged = true;
      break;
    }
  }
  trace.final_state = std::move(state);
  return trace;
}

struct StepsizeBound {
  double alpha_s = 0.0;
  /// min(1/l1, alpha_s)
  double alpha_bound = 0.0;
  double l_mu = 0.0;
  double l_0 = 0.0;
};

/// alpha_s = mu (1-rho)^2 / (l3 L_mu [(1-rho) L_0 + 2 l2 l3]),
/// L_mu = mu + l1 + l2 l3, L_0 = l1 + l2 + l2 l3.
inline StepsizeBound max_stepsize(const Constants& c, double rho) {
  c.check();
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
  StepsizeBound b;
  b.l_mu = c.mu + c.l1 + c.l2 * c.l3;
  b.l_0 = c.l1 + c.l2 + c.l2 * c.l3;
  const double gap = 1.0 - rho;
  b.alpha_s = c.mu * gap * gap / (c.l3 * b.l_mu * (gap * b.l_0 + 2.0 * c.l2 * c.l3));
  b.alpha_bound = std::min(1.0 / c.l1, b.alpha_s);
  return b;
}

inline constexpr const char* kTraceCsvHeader = "k,err_x,cons_sigma,cons_y,step_norm,objective";

inline std::string trace_to_csv(const Trace& t) {
  std::ostringstream out;
  out << kTraceCsvHeader << '\n';
  const auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
  for (const auto& r : t.records)
    out << r.k << ',' << opt(r.err_x) << ',' << text::format_double(r.cons_sigma) << ','
        << text::format_double(r.cons_y) << ',' << opt(r.step_norm) << ',' << text::format_double(r.objective)
        << '\n';
  return out.str();
}

}  // namespace dgt
