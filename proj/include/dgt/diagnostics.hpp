// Numerical checks of the linear-rate machinery: the 3x3 comparison matrix
// M(alpha) = X + alpha E bounding (||x_k - x*||, ||sigma_k - J sigma_k||,
// ||y_k - J y_k||), its spectral radius, empirical rate fits on traces and the
// average-tracking audit.
#pragma once

#include "dgt/common.hpp"
#include "dgt/engine.hpp"
#include "dgt/model.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace dgt {

using Matrix3 = Eigen::Matrix3d;

namespace detail {

inline void check_m_inputs(const Constants& c, double rho) {
  c.check();
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
}

}  // namespace detail

/// X = [[1,0,0],[0,rho,0],[0,2 l2,rho]]
inline Matrix3 contraction_base(const Constants& c, double rho) {
  detail::check_m_inputs(c, rho);
  Matrix3 x;
  x << 1.0, 0.0, 0.0,  //
      0.0, rho, 0.0,   //
      0.0, 2.0 * c.l2, rho;
  return x;
}

inline Matrix3 contraction_perturbation(const Constants& c) {
  c.check();
  const double mu = c.mu, l1 = c.l1, l2 = c.l2, l3 = c.l3;
  Matrix3 e;
  e << -mu, l1, l3,                                                  //
      l1 * l2 * (1.0 + l3), l1 * l3, l3 * l3,                        //
      l1 * l2 * (1.0 + l3) * (1.0 + l3), l1 * l2 * (1.0 + l3), l2 * l3 * (1.0 + l3);
  return e;
}

inline Matrix3 build_M(double alpha, const Constants& c, double rho) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  return contraction_base(c, rho) + alpha * contraction_perturbation(c);
}

/// Roots of lambda^3 + a lambda^2 + b lambda + c by the trigonometric /
/// Cardano closed form, polished with Newton steps on the cubic.
inline std::array<std::complex<double>, 3> cubic_roots(double a, double b, double c) {
  using cplx = std::complex<double>;
  const double shift = -a / 3.0;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  std::array<cplx, 3> roots;
  const double scale = 1.0 + std::abs(a) * std::abs(a) + std::abs(b);
  if (std::abs(p) <= 1e-15 * scale && std::abs(q) <= 1e-15 * scale * std::sqrt(scale)) {
    roots = {cplx(shift), cplx(shift), cplx(shift)};
  } else {
    const double disc = q * q / 4.0 + p * p * p / 27.0;
    if (disc < 0.0) {
      // three real roots (p < 0 here)
      const double r = 2.0 * std::sqrt(-p / 3.0);
      const double arg = std::clamp(3.0 * q / (p * r), -1.0, 1.0);
      const double theta = std::acos(arg) / 3.0;
      for (int k = 0; k < 3; ++k)
        roots[static_cast<std::size_t>(k)] = cplx(r * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0) + shift);
    } else {
      const double sq = std::sqrt(disc);
      const double u = std::cbrt(-q / 2.0 + sq);
      const double v = std::cbrt(-q / 2.0 - sq);
      const double real = u + v;
      roots[0] = cplx(real + shift);
      // remaining pair from the deflated quadratic t^2 + real t + (p + real^2)
      const double bq = real;
      const double cq = p + real * real;
      const double dq = bq * bq - 4.0 * cq;
      if (dq >= 0.0) {
        const double s = std::sqrt(dq);
        const double t1 = (bq >= 0.0) ? (-bq - s) / 2.0 : (-bq + s) / 2.0;
        const double t2 = (t1 != 0.0) ? cq / t1 : -bq - t1;
        roots[1] = cplx(t1 + shift);
        roots[2] = cplx(t2 + shift);
      } else {
        const double im = std::sqrt(-dq) / 2.0;
        roots[1] = cplx(-bq / 2.0 + shift, im);
        roots[2] = cplx(-bq / 2.0 + shift, -im);
      }
    }
  }
  const auto poly = [&](cplx z) { return ((z + a) * z + b) * z + c; };
  const auto dpoly = [&](cplx z) { return (3.0 * z + 2.0 * a) * z + b; };
  for (auto& z : roots) {
    for (int it = 0; it < 4; ++it) {
      const cplx dz = dpoly(z);
      if (std::abs(dz) == 0.0) break;
      const cplx cand = z - poly(z) / dz;
      if (!(std::abs(poly(cand)) < std::abs(poly(z)))) break;
      z = cand;
    }
  }
  return roots;
}

inline std::array<std::complex<double>, 3> eigenvalues3(const Matrix3& m) {
  const double tr = m.trace();
  const double minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
                        m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  return cubic_roots(-tr, minors, -m.determinant());
}

inline double spectral_radius(const Matrix3& m) {
  double r = 0.0;
  for (const auto& z : eigenvalues3(m)) r = std::max(r, std::abs(z));
  return r;
}

struct RatePoint {
  double alpha = 0.0;
  double rho_M = 0.0;
};

inline std::vector<RatePoint> rate_check(const Constants& c, double rho, std::span<const double> alphas) {
  std::vector<RatePoint> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a > 0.0)) throw std::invalid_argument("sampled step sizes must be positive");
    out.push_back({a, spectral_radius(build_M(a, c, rho))});
  }
  return out;
}

/// det(I - M(alpha)) vanishes at alpha = 0 and at one more root, linear in
/// alpha after dividing out the trivial one. Returns that root when positive.
inline std::optional<double> stability_threshold(const Constants& c, double rho) {
  const auto det_at = [&](double a) { return (Matrix3::Identity() - build_M(a, c, rho)).determinant(); };
  // det/alpha = c0 + c1 alpha, recovered from two evaluations and refitted
  // around the first estimate.
  const auto affine_root = [&](double h1, double h2) -> std::optional<double> {
    const double g1 = det_at(h1) / h1, g2 = det_at(h2) / h2;
    const double slope = (g2 - g1) / (h2 - h1);
    if (slope == 0.0 || !std::isfinite(slope)) return std::nullopt;
    const double root = h1 - g1 / slope;
    if (!(root > 0.0)) return std::nullopt;
    return root;
  };
  const double s = max_stepsize(c, rho).alpha_s;
  auto root = affine_root(0.5 * s, s);
  if (!root) return std::nullopt;
  if (auto refined = affine_root(0.9 * *root, 1.1 * *root)) root = refined;
  return root;
}

struct FitWindow {
  double drop_fraction = 0.1;
  double floor = 1e-12;
  std::size_t min_points = 20;
};

struct RateFit {
  double empirical_q = 0.0;
  double fit_r2 = 0.0;
  std::size_t first = 0;  // record range [first, last] used
  std::size_t last = 0;
  bool contracting = false;
};

class RateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares slope of log(err) over the usable window; q = exp(slope).
/// Usable: indices before the first error at or below `floor`, after dropping
/// the leading `drop_fraction` of them.
inline RateFit fit_linear_rate(std::span<const double> errors, FitWindow window = {}) {
  std::size_t usable = 0;
  while (usable < errors.size() && errors[usable] > window.floor && std::isfinite(errors[usable])) ++usable;
  const auto first = static_cast<std::size_t>(std::floor(window.drop_fraction * static_cast<double>(usable)));
  if (usable < first + window.min_points || usable - first < 2)
    throw RateFitError("insufficient usable points for a rate fit (" + std::to_string(usable - std::min(first, usable)) +
                       " < " + std::to_string(window.min_points) + ")");
  const double n = static_cast<double>(usable - first);
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = first; k < usable; ++k) {
    sx += static_cast<double>(k);
    sy += std::log(errors[k]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = first; k < usable; ++k) {
    const double dx = static_cast<double>(k) - mx, dy = std::log(errors[k]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (syy <= 1e-24 * n) throw RateFitError("log-error is constant over the window: non-contracting");
  const double slope = sxy / sxx;
  RateFit fit;
  fit.empirical_q = std::exp(slope);
  fit.fit_r2 = (sxy * sxy) / (sxx * syy);
  fit.first = first;
  fit.last = usable - 1;
  fit.contracting = fit.empirical_q < 1.0;
  return fit;
}

inline RateFit fit_linear_rate(const Trace& t, FitWindow window = {}) {
  std::vector<double> errs;
  errs.reserve(t.records.size());
  for (const auto& r : t.records) {
    if (!r.err_x) throw RateFitError("trace has no err_x column; supply an oracle solution");
    errs.push_back(*r.err_x);
  }
  return fit_linear_rate(std::span<const double>(errs), window);
}

struct RateReport {
  double alpha = 0.0;
  double alpha_s = 0.0;
  double rho_M = 0.0;
  double empirical_q = 0.0;
  double fit_r2 = 0.0;
  std::size_t fit_first = 0;
  std::size_t fit_last = 0;
};

inline constexpr const char* kRateCsvHeader = "alpha,alpha_s,rho_M,empirical_q,fit_r2";

inline std::string rate_csv_row(const RateReport& r) {
  using text::format_double;
  return format_double(r.alpha) + ',' + format_double(r.alpha_s) + ',' + format_double(r.rho_M) + ',' +
         format_double(r.empirical_q) + ',' + format_double(r.fit_r2);
}

inline void print_rate_table(std::ostream& out, std::span<const RateReport> rows) {
  std::ostringstream buf;
  buf << std::setw(14) << "alpha" << std::setw(14) << "alpha_s" << std::setw(14) << "rho_M" << std::setw(14)
      << "empirical_q" << std::setw(12) << "fit_r2" << std::setw(16) << "window" << '\n';
  buf << std::scientific << std::setprecision(5);
  for (const auto& r : rows) {
    buf << std::setw(14) << r.alpha << std::setw(14) << r.alpha_s << std::setw(14) << r.rho_M;
    buf << std::fixed << std::setprecision(8) << std::setw(14) << r.empirical_q << std::setw(12) << r.fit_r2;
    buf << std::setw(16) << (std::to_string(r.fit_first) + "-" + std::to_string(r.fit_last)) << '\n';
    buf << std::scientific << std::setprecision(5);
  }
  out << buf.str();
}

struct TrackingAudit {
  double max_sigma_deviation = 0.0;
  double max_y_deviation = 0.0;
  std::size_t worst_iteration = 0;

  double max_deviation() const { return std::max(max_sigma_deviation, max_y_deviation); }
  bool holds(double tol = 1e-10) const { return max_deviation() < tol; }
};

inline TrackingAudit tracking_audit(const Trace& t) {
  TrackingAudit a;
  double worst = -1.0;
  for (const auto& r : t.records) {
    a.max_sigma_deviation = std::max(a.max_sigma_deviation, r.tracking.sigma);
    a.max_y_deviation = std::max(a.max_y_deviation, r.tracking.y);
    const double m = std::max(r.tracking.sigma, r.tracking.y);
    if (m > worst) {
      worst = m;
      a.worst_iteration = r.k;
    }
  }
  return a;
}

/// Audit over explicitly recorded states (recomputes the identities).
inline TrackingAudit tracking_audit(std::span<const SwarmState> states) {
  TrackingAudit a;
  double worst = -1.0;
  for (const auto& s : states) {
    const auto dev = tracking_deviation(s);
    a.max_sigma_deviation = std::max(a.max_sigma_deviation, dev.sigma);
    a.max_y_deviation = std::max(a.max_y_deviation, dev.y);
    if (std::max(dev.sigma, dev.y) > worst) {
      worst = std::max(dev.sigma, dev.y);
      a.worst_iteration = s.k;
    }
  }
  return a;
}

}  // namespace dgt
