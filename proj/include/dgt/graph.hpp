// Communication weight matrices: construction, validation against the
// strongly-connected / doubly-stochastic requirements, and the spectral gap.
//
// Convention: entry (i, j) is the weight agent i applies to the message of
// agent j, so a nonzero a_ij is a directed edge j -> i.
#pragma once

#include "dgt/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dgt {

inline constexpr double kStochasticTolerance = 1e-12;

enum class TopologyKind { complete, directed_ring, undirected_ring, star, path, explicit_matrix };

inline std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::complete: return "complete";
    case TopologyKind::directed_ring: return "directed-ring";
    case TopologyKind::undirected_ring: return "undirected-ring";
    case TopologyKind::star: return "star";
    case TopologyKind::path: return "path";
    case TopologyKind::explicit_matrix: return "explicit";
  }
  return "unknown";
}

inline std::optional<TopologyKind> topology_kind_from_string(std::string_view name) {
  for (auto k : {TopologyKind::complete, TopologyKind::directed_ring, TopologyKind::undirected_ring,
                 TopologyKind::star, TopologyKind::path, TopologyKind::explicit_matrix})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

struct TopologySpec {
  TopologyKind kind = TopologyKind::complete;
  int n_agents = 2;
  /// Off-diagonal weight of the directed ring; ignored by the other kinds.
  double self_weight_parameter = 0.5;
  std::optional<Matrix> explicit_entries;

  void check() const {
    if (kind == TopologyKind::explicit_matrix) {
      if (!explicit_entries) throw GraphError("explicit topology requires entries");
      if (explicit_entries->rows() != explicit_entries->cols())
        throw GraphError("explicit weight matrix must be square");
      if (explicit_entries->rows() < 2) throw GraphError("topology needs at least 2 agents");
      return;
    }
    if (explicit_entries) throw GraphError("entries are only allowed for kind=explicit");
    if (n_agents < 2) throw GraphError("topology needs at least 2 agents");
    if (kind == TopologyKind::directed_ring &&
        !(self_weight_parameter > 0.0 && self_weight_parameter < 1.0))
      throw GraphError("directed-ring lambda must lie in (0, 1)");
  }
};

struct ValidationReport {
  bool row_stochastic = false;
  bool column_stochastic = false;
  bool strongly_connected = false;

  bool ok() const { return row_stochastic && column_stochastic && strongly_connected; }
};

namespace detail {

inline bool reaches_all(const Matrix& a, bool reverse) {
  const auto n = a.rows();
  if (n == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (v == u || seen[static_cast<std::size_t>(v)]) continue;
      // forward: u -> v exists iff a(v, u) > 0
      const double w = reverse ? a(u, v) : a(v, u);
      if (w > 0.0) {
        seen[static_cast<std::size_t>(v)] = 1;
        frontier.push(v);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace detail

/// Report-only check; never throws for square input.
inline ValidationReport validate(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("weight matrix must be square");
  ValidationReport r;
  const bool nonnegative = (a.array() >= 0.0).all() && a.allFinite();
  r.row_stochastic =
      nonnegative && ((a.rowwise().sum().array() - 1.0).abs() <= kStochasticTolerance).all();
  r.column_stochastic =
      nonnegative && ((a.colwise().sum().array() - 1.0).abs() <= kStochasticTolerance).all();
  r.strongly_connected = detail::reaches_all(a, false) && detail::reaches_all(a, true);
  return r;
}

class WeightMatrix {
 public:
  /// Validating constructor; throws GraphError unless every requirement holds.
  static WeightMatrix from_entries(Matrix entries) {
    if (entries.rows() != entries.cols()) throw GraphError("weight matrix must be square");
    if (entries.rows() < 1) throw GraphError("weight matrix is empty");
    if (!((entries.array() >= 0.0) && (entries.array() <= 1.0)).all())
      throw GraphError("weight entries must lie in [0, 1]");
    const auto report = validate(entries);
    if (!report.row_stochastic) throw GraphError("weight matrix is not row-stochastic");
    if (!report.column_stochastic) throw GraphError("weight matrix is not column-stochastic");
    if (!report.strongly_connected) throw GraphError("communication graph is not strongly connected");
    return WeightMatrix(std::move(entries));
  }

  /// Skips validation. Only for experiments that deliberately break the
  /// requirements (e.g. showing tracking fails without column sums of one).
  static WeightMatrix unchecked(Matrix entries) {
    if (entries.rows() != entries.cols()) throw GraphError("weight matrix must be square");
    return WeightMatrix(std::move(entries));
  }

  int n_agents() const { return static_cast<int>(a_.rows()); }
  const Matrix& entries() const { return a_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return a_(i, j); }

 private:
  explicit WeightMatrix(Matrix a) : a_(std::move(a)) {}
  Matrix a_;
};

inline ValidationReport validate(const WeightMatrix& w) { return validate(w.entries()); }

namespace detail {

inline Matrix metropolis(int n, const std::set<std::pair<int, int>>& edges) {
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (auto [i, j] : edges) {
    ++degree[static_cast<std::size_t>(i)];
    ++degree[static_cast<std::size_t>(j)];
  }
  Matrix a = Matrix::Zero(n, n);
  for (auto [i, j] : edges) {
    const double w =
        1.0 / (1.0 + std::max(degree[static_cast<std::size_t>(i)], degree[static_cast<std::size_t>(j)]));
    a(i, j) = w;
    a(j, i) = w;
  }
  for (int i = 0; i < n; ++i) a(i, i) = 1.0 - (a.row(i).sum() - a(i, i));
  return a;
}

inline std::pair<int, int> undirected_edge(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

}  // namespace detail

inline WeightMatrix build_weights(const TopologySpec& spec) {
  spec.check();
  const int n = spec.n_agents;
  switch (spec.kind) {
    case TopologyKind::complete:
      return WeightMatrix::from_entries(Matrix::Constant(n, n, 1.0 / n));
    case TopologyKind::directed_ring: {
      const double lambda = spec.self_weight_parameter;
      Matrix a = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        a(i, i) = 1.0 - lambda;
        a(i, (i - 1 + n) % n) += lambda;
      }
      return WeightMatrix::from_entries(std::move(a));
    }
    case TopologyKind::undirected_ring: {
      std::set<std::pair<int, int>> edges;
      for (int i = 0; i < n; ++i) edges.insert(detail::undirected_edge(i, (i + 1) % n));
      return WeightMatrix::from_entries(detail::metropolis(n, edges));
    }
    case TopologyKind::star: {
      std::set<std::pair<int, int>> edges;
      for (int i = 1; i < n; ++i) edges.insert({0, i});
      return WeightMatrix::from_entries(detail::metropolis(n, edges));
    }
    case TopologyKind::path: {
      std::set<std::pair<int, int>> edges;
      for (int i = 0; i + 1 < n; ++i) edges.insert({i, i + 1});
      return WeightMatrix::from_entries(detail::metropolis(n, edges));
    }
    case TopologyKind::explicit_matrix:
      return WeightMatrix::from_entries(*spec.explicit_entries);
  }
  throw GraphError("unknown topology kind");
}

/// rho = ||A - J||_2 with J = 11^T / N. Strictly below one for valid matrices.
inline double spectral_gap(const WeightMatrix& w) {
  if (!validate(w).ok()) throw GraphError("spectral gap requires a valid weight matrix");
  const auto n = w.entries().rows();
  const Matrix deviation = w.entries() - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::JacobiSVD<Matrix> svd(deviation);
  return svd.singularValues()(0);
}

/// Parses `kind=..`, `n=..`, `lambda=..` lines, or bare whitespace-separated
/// rows for an explicit matrix (with or without `kind=explicit`).
inline TopologySpec parse_topology(std::istream& in) {
  const auto doc = text::parse_key_values(in);
  TopologySpec spec;
  if (!doc.bare_lines.empty()) {
    if (doc.has("kind") && doc.at("kind") != "explicit")
      throw FormatError("matrix rows given for kind=" + doc.at("kind"));
    std::string joined;
    for (const auto& row : doc.bare_lines) joined += row + ";";
    spec.kind = TopologyKind::explicit_matrix;
    spec.explicit_entries = text::parse_matrix(joined);
    spec.n_agents = static_cast<int>(spec.explicit_entries->rows());
    if (doc.has("n") && text::parse_integer(doc.at("n")) != spec.n_agents)
      throw FormatError("n does not match the number of matrix rows");
    return spec;
  }
  const auto kind = topology_kind_from_string(doc.at("kind"));
  if (!kind) throw FormatError("unknown topology kind '" + doc.at("kind") + "'");
  if (*kind == TopologyKind::explicit_matrix) throw FormatError("kind=explicit needs matrix rows");
  spec.kind = *kind;
  spec.n_agents = static_cast<int>(text::parse_integer(doc.at("n")));
  if (doc.has("lambda")) spec.self_weight_parameter = text::parse_double(doc.at("lambda"));
  return spec;
}

inline TopologySpec load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read topology file '" + path + "'");
  return parse_topology(in);
}

}  // namespace dgt
