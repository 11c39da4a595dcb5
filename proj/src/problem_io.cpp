#include "lqrl/problem_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

namespace lqrl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (item.empty() || ec != std::errc() || ptr != last) {
      throw ConfigError("key '" + key + "': cannot parse number '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

int parse_dim(const std::string& key, const std::string& text) {
  const auto v = parse_numbers(key, text);
  if (v.size() != 1 || v[0] != static_cast<int>(v[0]) || v[0] < 1) {
    throw ConfigError("key '" + key + "' must be a positive integer");
  }
  return static_cast<int>(v[0]);
}

Matrix row_major(const std::string& key, const std::vector<double>& v, int rows, int cols) {
  if (static_cast<int>(v.size()) != rows * cols) {
    throw ConfigError("key '" + key + "': expected " + std::to_string(rows * cols) +
                      " entries, got " + std::to_string(v.size()));
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

void write_row_major(std::ostream& out, const char* key, const Matrix& m) {
  out << key << " = ";
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out << ((i || j) ? ", " : "") << m(i, j);
  out << '\n';
}

}  // namespace

bool is_builtin_problem(const std::string& name) {
  return name == "scalar-canonical" || name == "planar";
}

LqProblem builtin_problem(const std::string& name) {
  LqProblem p;
  p.T = 1.0;
  if (name == "scalar-canonical") {
    p.n = p.d = 1;
    p.x0 = Vector::Ones(1);
    p.theta_star = {Matrix::Zero(1, 1), Matrix::Ones(1, 1)};
    p.cost = {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  } else if (name == "planar") {
    p.n = p.d = 2;
    p.x0 = Vector::Zero(2);
    p.x0(0) = 1.0;
    Matrix A(2, 2);
    A << 0.0, 1.0, -1.0, 0.0;
    p.theta_star = {A, Matrix::Identity(2, 2)};
    p.cost = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  } else {
    throw ConfigError("unknown built-in problem '" + name + "'");
  }
  return p;
}

LqProblem parse_problem(std::istream& in) {
  static const std::vector<std::string> kKeys = {"n", "d", "T", "x0", "A_star", "B_star", "Q", "R"};
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ConfigError("duplicate key '" + key + "'");
    }
  }
  for (const auto& k : kKeys) {
    if (!kv.count(k)) throw ConfigError("missing key '" + k + "'");
  }

  LqProblem p;
  p.n = parse_dim("n", kv["n"]);
  p.d = parse_dim("d", kv["d"]);
  const auto T = parse_numbers("T", kv["T"]);
  if (T.size() != 1) throw ConfigError("key 'T' must be a single number");
  p.T = T[0];
  const auto x0 = parse_numbers("x0", kv["x0"]);
  if (static_cast<int>(x0.size()) != p.n) throw ConfigError("key 'x0': expected n entries");
  p.x0 = Eigen::Map<const Vector>(x0.data(), p.n);
  p.theta_star.A = row_major("A_star", parse_numbers("A_star", kv["A_star"]), p.n, p.n);
  p.theta_star.B = row_major("B_star", parse_numbers("B_star", kv["B_star"]), p.n, p.d);
  p.cost.Q = row_major("Q", parse_numbers("Q", kv["Q"]), p.n, p.n);
  p.cost.R = row_major("R", parse_numbers("R", kv["R"]), p.d, p.d);

  const auto report = validate_problem(p);
  if (!report.ok()) throw ConfigError("invalid problem: " + report.summary());
  return p;
}

LqProblem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open problem file '" + path.string() + "'");
  try {
    return parse_problem(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

LqProblem resolve_problem(const std::string& name_or_path) {
  if (is_builtin_problem(name_or_path)) return builtin_problem(name_or_path);
  return load_problem(name_or_path);
}

void write_problem(std::ostream& out, const LqProblem& p) {
  const auto old_precision = out.precision(17);
  out << "n = " << p.n << "\nd = " << p.d << "\nT = " << p.T << '\n';
  write_row_major(out, "x0", p.x0.transpose());
  write_row_major(out, "A_star", p.theta_star.A);
  write_row_major(out, "B_star", p.theta_star.B);
  write_row_major(out, "Q", p.cost.Q);
  write_row_major(out, "R", p.cost.R);
  out.precision(old_precision);
}

}  // namespace lqrl
