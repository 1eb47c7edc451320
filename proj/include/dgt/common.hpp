// Shared vocabulary types, error classes and the key=value text format used by
// topology, problem and oracle files.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dgt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConstantsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterate stops being finite or blows past the magnitude guard.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, std::size_t agent, const std::string& what)
      : std::runtime_error(what), iteration_(iteration), agent_(agent) {}

  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t agent() const noexcept { return agent_; }

 private:
  std::size_t iteration_;
  std::size_t agent_;
};

namespace text {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// One parsed text document: `key=value` pairs plus bare lines (matrix rows).
/// Blank lines and lines starting with '#' are skipped.
struct KeyValueDocument {
  std::map<std::string, std::string> values;
  std::vector<std::string> bare_lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  const std::string& at(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw FormatError("missing key '" + key + "'");
    return it->second;
  }
};

inline KeyValueDocument parse_key_values(std::istream& in) {
  KeyValueDocument doc;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      doc.bare_lines.emplace_back(t);
      continue;
    }
    const auto key = trim(t.substr(0, eq));
    if (key.empty()) throw FormatError("empty key in line '" + std::string(t) + "'");
    doc.values[std::string(key)] = std::string(trim(t.substr(eq + 1)));
  }
  return doc;
}

inline double parse_double(std::string_view s) {
  const std::string str(trim(s));
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &pos);
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + str + "'");
  }
  if (pos != str.size()) throw FormatError("not a number: '" + str + "'");
  return v;
}

inline long long parse_integer(std::string_view s) {
  const std::string str(trim(s));
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(str, &pos);
  } catch (const std::exception&) {
    throw FormatError("not an integer: '" + str + "'");
  }
  if (pos != str.size()) throw FormatError("not an integer: '" + str + "'");
  return v;
}

/// Whitespace- or comma-separated numbers.
inline Vector parse_vector(std::string_view s) {
  std::string buf(s);
  for (char& c : buf)
    if (c == ',') c = ' ';
  std::istringstream in(buf);
  std::vector<double> vals;
  std::string tok;
  while (in >> tok) vals.push_back(parse_double(tok));
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// Rows separated by ';', entries by whitespace or commas.
inline Matrix parse_matrix(std::string_view s) {
  std::vector<Vector> rows;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(';', start);
    const auto piece = trim(s.substr(start, end == std::string_view::npos ? s.npos : end - start));
    if (!piece.empty()) rows.push_back(parse_vector(piece));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw FormatError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return m;
}

/// Round-trippable decimal rendering (17 significant digits).
inline std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

inline std::string format_vector(const Vector& v, char sep = ' ') {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace text
}  // namespace dgt
