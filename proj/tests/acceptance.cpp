// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "dgt/dgt.hpp"
#include "dgt/tbb_executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace dgt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Audits of every run made by the suite; criterion 3 checks all of them.
std::vector<std::pair<std::string, TrackingAudit>> g_audits;

Trace audited_run(const std::string& label, const ProblemSpec& p, const WeightMatrix& w, const RunConfig& cfg) {
  Trace t = run(p, w, cfg);
  g_audits.emplace_back(label, tracking_audit(t));
  return t;
}

WeightMatrix weights(TopologyKind kind, int n, double lambda = 0.5) {
  TopologySpec s;
  s.kind = kind;
  s.n_agents = n;
  s.self_weight_parameter = lambda;
  return build_weights(s);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Central differences with a fixed relative step, independent of the library helper.
Vector central_diff(const std::function<double(const Vector&)>& f, const Vector& x) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
    Vector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale < 1e-12 ? 0.0 : (a - b).norm() / scale;
}

// 1. Example 1 on the 2-agent complete graph.
Outcome criterion_example1() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.alpha = 0.1;
  cfg.max_iters = 10000;
  cfg.x_tolerance = 1e-12;
  cfg.init = ExplicitStart{Vector::Zero(2)};
  const auto t = audited_run("example1/complete", builtin_example1(), weights(TopologyKind::complete, 2), cfg);
  const Vector x = t.final_state.stacked_x();
  const double err = (x - Vector{{0.25, 1.25}}).norm();
  const Eigen::Vector2d nash = nash_solve_example1();
  const double nash_err = (nash - Eigen::Vector2d(0.5, 1.5)).norm();
  const double secs = seconds_since(t0);
  const bool pass = t.converged && t.iterations() < 10000 && err < 1e-6 && nash_err < 1e-12 && secs < 1.0;
  return {pass, "x=(" + fmt("%.9f", x[0]) + ", " + fmt("%.9f", x[1]) + ") err=" + fmt("%.2e", err) +
                    " iterations=" + std::to_string(t.iterations()) + " nash_err=" + fmt("%.2e", nash_err) +
                    " time=" + fmt("%.3f", secs) + "s"};
}

// 2. Placement problem on the undirected Metropolis 5-ring at alpha = 0.05.
Outcome criterion_placement() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = builtin_placement();
  const auto oracle = centralized_solve(p);
  RunConfig cfg;
  cfg.alpha = 0.05;
  cfg.max_iters = 20000;
  cfg.x_tolerance = 1e-12;
  cfg.seed = 1;
  cfg.x_star = oracle.x_star;
  const auto t = audited_run("placement/ring5", p, weights(TopologyKind::undirected_ring, 5), cfg);
  const double err = *t.records.back().err_x;
  double sigma_err = 0.0;
  for (const auto& a : t.final_state.agents) sigma_err = std::max(sigma_err, (a.sigma - oracle.sigma_star).norm());
  const double secs = seconds_since(t0);
  const bool pass = t.converged && err < 1e-6 && sigma_err < 1e-6 && secs < 5.0;
  return {pass, "iterations=" + std::to_string(t.iterations()) + " err_x=" + fmt("%.2e", err) +
                    " max_sigma_err=" + fmt("%.2e", sigma_err) + " time=" + fmt("%.3f", secs) + "s"};
}

// 3. Tracking identities over the property grid plus every other run of the suite.
Outcome criterion_tracking() {
  for (const auto& p : {builtin_example1(), builtin_placement()}) {
    for (auto kind : {TopologyKind::complete, TopologyKind::directed_ring, TopologyKind::undirected_ring}) {
      const auto w = weights(kind, p.n_agents());
      const double alpha = 0.9 * max_stepsize(*p.constants(), spectral_gap(w)).alpha_bound;
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        RunConfig cfg;
        cfg.alpha = alpha;
        cfg.max_iters = 200000;
        cfg.x_tolerance = 1e-12;
        cfg.seed = seed;
        audited_run(p.name() + "/" + to_string(kind) + "/seed" + std::to_string(seed), p, w, cfg);
      }
    }
  }
  double worst = 0.0;
  std::string worst_label;
  for (const auto& [label, audit] : g_audits) {
    if (audit.max_deviation() >= worst) {
      worst = audit.max_deviation();
      worst_label = label;
    }
  }
  const bool pass = worst < 1e-10;
  return {pass, std::to_string(g_audits.size()) + " runs audited, max deviation=" + fmt("%.2e", worst) + " (" +
                    worst_label + ")"};
}

// 4. Linear rate at half the step-size bound.
Outcome criterion_rate() {
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<ProblemSpec, TopologyKind>> cases{
      {builtin_example1(), TopologyKind::complete}, {builtin_placement(), TopologyKind::undirected_ring}};
  for (const auto& [p, kind] : cases) {
    const auto w = weights(kind, p.n_agents());
    const auto bound = max_stepsize(*p.constants(), spectral_gap(w));
    RunConfig cfg;
    cfg.alpha = 0.5 * bound.alpha_bound;
    cfg.max_iters = 500000;
    cfg.x_tolerance = 1e-13;
    cfg.seed = 1;
    cfg.x_star = centralized_solve(p).x_star;
    const auto t = audited_run(p.name() + "/" + to_string(kind) + "/rate", p, w, cfg);
    try {
      const auto fit = fit_linear_rate(t);
      const bool ok = fit.empirical_q < 1.0 && fit.fit_r2 > 0.99;
      pass = pass && ok;
      detail += p.name() + ": alpha=" + fmt("%.4e", cfg.alpha) + " q=" + fmt("%.6f", fit.empirical_q) +
                " r2=" + fmt("%.5f", fit.fit_r2) + "; ";
    } catch (const RateFitError& e) {
      pass = false;
      detail += p.name() + ": " + e.what() + "; ";
    }
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

// 5. Comparison-matrix machinery on a grid of constants and graph gaps.
Outcome criterion_comparison_matrix() {
  std::vector<Constants> sets;
  const auto make = [](double mu, double l1, double l2, double l3) {
    Constants c;
    c.mu = mu;
    c.l1 = l1;
    c.l2 = l2;
    c.l3 = l3;
    return c;
  };
  sets.push_back(make(1.0, 1.0, 1.0, 1.0));
  sets.push_back(make(0.5, 1.0, 1.0, 1.0));
  sets.push_back(*builtin_example1().constants());
  sets.push_back(*builtin_placement().constants());
  int combos = 0, radius_ok = 0, det_ok = 0, slope_ok = 0;
  double worst_det = 0.0, worst_radius = 0.0, worst_slope = 0.0;
  for (const auto& c : sets) {
    for (double rho : {0.0, 0.25, 0.5, 0.8}) {
      ++combos;
      const double a_s = max_stepsize(c, rho).alpha_s;
      bool all_below = true;
      for (double f : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double r = spectral_radius(build_M(f * a_s, c, rho));
        worst_radius = std::max(worst_radius, r);
        all_below = all_below && r < 1.0;
      }
      radius_ok += all_below;
      // |det| relative to Hadamard's bound (product of row norms).
      const Matrix3 gap = Matrix3::Identity() - build_M(a_s, c, rho);
      const double scale = gap.row(0).norm() * gap.row(1).norm() * gap.row(2).norm();
      const double rel = std::abs(gap.determinant()) / scale;
      worst_det = std::max(worst_det, rel);
      det_ok += rel < 1e-6;
      const double h = 1e-6 * a_s;
      const double slope = (spectral_radius(build_M(h, c, rho)) - 1.0) / h;
      const double slope_rel = std::abs(slope + c.mu) / c.mu;
      worst_slope = std::max(worst_slope, slope_rel);
      slope_ok += slope_rel < 0.05;
    }
  }
  const bool pass = combos >= 12 && radius_ok == combos && det_ok == combos && slope_ok == combos;
  return {pass, std::to_string(combos) + " combinations: rho(M)<1 on " + std::to_string(radius_ok) +
                    " (max rho " + fmt("%.4f", worst_radius) + "), det(I-M(alpha_s))~0 on " + std::to_string(det_ok) +
                    " (max rel " + fmt("%.2e", worst_det) + "), slope~-mu on " + std::to_string(slope_ok) +
                    " (max rel dev " + fmt("%.2e", worst_slope) + ")"};
}

// 6. Analytic gradients against central differences.
Outcome criterion_gradients() {
  double worst = 0.0;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (const auto& p : {builtin_example1(), builtin_placement()}) {
    const int d = p.agg_dim();
    for (int t = 0; t < 100; ++t) {
      Vector x(p.total_dim()), s(d);
      for (auto& v : x) v = u(rng);
      for (auto& v : s) v = u(rng);
      for (int i = 0; i < p.n_agents(); ++i) {
        const auto& fn = p.agent(i);
        const Vector xi = p.block(x, i);
        worst = std::max(worst, rel_err(fn.grad1_f(xi, s), central_diff([&](const Vector& v) { return fn.f(v, s); }, xi)));
        worst = std::max(worst, rel_err(fn.grad2_f(xi, s), central_diff([&](const Vector& v) { return fn.f(xi, v); }, s)));
        Matrix jac(xi.size(), d);
        for (int l = 0; l < d; ++l) jac.col(l) = central_diff([&](const Vector& v) { return fn.phi(v)[l]; }, xi);
        worst = std::max(worst, rel_err(fn.grad_phi(xi), jac));
      }
      worst = std::max(worst, rel_err(full_gradient(x, p),
                                      central_diff([&](const Vector& v) { return global_objective(v, p); }, x)));
    }
  }
  return {worst < 1e-5, "200 points, max relative error=" + fmt("%.2e", worst)};
}

// 7. Optimal consensual state is step-invariant; evaluators see only their own variables.
Outcome criterion_fixed_point_locality() {
  double worst_move = 0.0;
  for (const auto& p : {builtin_example1(), builtin_placement()}) {
    const auto sol = centralized_solve(p);
    Vector y_bar = Vector::Zero(p.agg_dim());
    for (int i = 0; i < p.n_agents(); ++i)
      y_bar += p.agent(i).grad2_f(p.block(sol.x_star, i), sol.sigma_star) / p.n_agents();
    const std::vector<Vector> sigmas(static_cast<std::size_t>(p.n_agents()), sol.sigma_star);
    const std::vector<Vector> ys(static_cast<std::size_t>(p.n_agents()), y_bar);
    const auto s = make_state(p, sol.x_star, sigmas, ys);
    for (auto kind : {TopologyKind::complete, TopologyKind::directed_ring, TopologyKind::undirected_ring}) {
      const auto next = step(s, weights(kind, p.n_agents()), p, 0.01);
      for (std::size_t i = 0; i < next.agents.size(); ++i) {
        worst_move = std::max(worst_move, (next.agents[i].x - s.agents[i].x).cwiseAbs().maxCoeff());
        worst_move = std::max(worst_move, (next.agents[i].sigma - s.agents[i].sigma).cwiseAbs().maxCoeff());
        worst_move = std::max(worst_move, (next.agents[i].y - s.agents[i].y).cwiseAbs().maxCoeff());
      }
    }
  }

  // Every evaluator call must receive a decision vector the agent itself held.
  const auto base = builtin_placement();
  std::vector<std::vector<Vector>> seen(5);
  auto note = [&seen](int i, const Vector& x) { seen[static_cast<std::size_t>(i)].push_back(x); };
  const auto p = base.with_wrapped_agents([&note](int i, AgentFunctions fns) {
    fns.phi = [i, &note, g = fns.phi](const Vector& x) { note(i, x); return g(x); };
    fns.grad_phi = [i, &note, g = fns.grad_phi](const Vector& x) { note(i, x); return g(x); };
    fns.f = [i, &note, g = fns.f](const Vector& x, const Vector& s) { note(i, x); return g(x, s); };
    fns.grad1_f = [i, &note, g = fns.grad1_f](const Vector& x, const Vector& s) { note(i, x); return g(x, s); };
    fns.grad2_f = [i, &note, g = fns.grad2_f](const Vector& x, const Vector& s) { note(i, x); return g(x, s); };
    return fns;
  });
  RunConfig cfg;
  cfg.alpha = 0.02;
  cfg.max_iters = 200;
  cfg.x_tolerance = 1e-14;
  cfg.record_states = true;
  const auto t = audited_run("placement/directed-ring/instrumented", p, weights(TopologyKind::directed_ring, 5), cfg);
  std::size_t calls = 0, foreign = 0;
  for (int i = 0; i < 5; ++i) {
    std::vector<Vector> own;
    for (const auto& st : t.states) own.push_back(st.agents[static_cast<std::size_t>(i)].x);
    for (const auto& x : seen[static_cast<std::size_t>(i)]) {
      ++calls;
      bool found = false;
      for (const auto& o : own) found = found || (o.size() == x.size() && o == x);
      foreign += !found;
    }
  }
  const bool pass = worst_move < 1e-12 && foreign == 0 && calls > 0;
  return {pass, "max fixed-point drift=" + fmt("%.2e", worst_move) + ", evaluator calls=" + std::to_string(calls) +
                    ", foreign arguments=" + std::to_string(foreign)};
}

// 8. Bitwise-identical CSV traces across repeats and executors.
Outcome criterion_determinism() {
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<ProblemSpec, TopologyKind>> cases{
      {builtin_example1(), TopologyKind::complete}, {builtin_placement(), TopologyKind::undirected_ring}};
  for (const auto& [p, kind] : cases) {
    const auto w = weights(kind, p.n_agents());
    RunConfig cfg;
    cfg.alpha = 0.05;
    cfg.max_iters = 20000;
    cfg.x_tolerance = 1e-12;
    cfg.seed = 7;
    cfg.x_star = centralized_solve(p).x_star;
    const std::string a = trace_to_csv(run(p, w, cfg));
    const std::string b = trace_to_csv(run(p, w, cfg));
    const std::string c = trace_to_csv(run(p, w, cfg, TbbExecutor{}));
    const bool ok = a == b && a == c;
    pass = pass && ok;
    detail += p.name() + ": " + std::to_string(a.size()) + " bytes " + (ok ? "identical" : "DIFFER") + "; ";
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  // Criterion 3 audits every run, so it is evaluated last.
  const std::vector<Criterion> order{
      {1, "example1 reproduction", criterion_example1},
      {2, "placement reproduction (ring5)", criterion_placement},
      {4, "linear rate at half the bound", criterion_rate},
      {5, "comparison-matrix machinery", criterion_comparison_matrix},
      {6, "gradient correctness", criterion_gradients},
      {7, "fixed point and locality", criterion_fixed_point_locality},
      {8, "determinism", criterion_determinism},
      {3, "average-tracking identities", criterion_tracking},
  };
  std::vector<std::pair<int, std::string>> lines;
  bool all = true;
  for (const auto& c : order) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    lines.emplace_back(c.id, std::string(o.pass ? "PASS" : "FAIL") + "  criterion " + std::to_string(c.id) + " (" +
                                 c.name + "): " + o.detail);
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [id, line] : lines) std::cout << line << '\n';
  std::cout << (all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << '\n';
  return all ? 0 : 1;
}
