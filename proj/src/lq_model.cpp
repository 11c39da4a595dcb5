#include "lqrl/lq_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lqrl {

namespace {
constexpr double kSymmetryTol = 1e-12;
constexpr double kRankTol = 1e-10;
constexpr double kBreakpointTol = 1e-9;
}  // namespace

Matrix stack_theta(const ModelTheta& theta) {
  const int n = theta.state_dim();
  const int d = theta.control_dim();
  Matrix stacked(n + d, n);
  stacked.topRows(n) = theta.A.transpose();
  stacked.bottomRows(d) = theta.B.transpose();
  return stacked;
}

ModelTheta unstack_theta(const Matrix& stacked, int n) {
  if (n < 1 || stacked.cols() != n || stacked.rows() <= n) {
    throw std::invalid_argument("unstack_theta: expected an (n+d) x n matrix");
  }
  const int d = static_cast<int>(stacked.rows()) - n;
  return ModelTheta{stacked.topRows(n).transpose(), stacked.bottomRows(d).transpose()};
}

double theta_distance(const ModelTheta& a, const ModelTheta& b) {
  if (a.A.rows() != b.A.rows() || a.A.cols() != b.A.cols() || a.B.rows() != b.B.rows() ||
      a.B.cols() != b.B.cols()) {
    throw std::invalid_argument("theta_distance: dimension mismatch");
  }
  return std::sqrt((a.A - b.A).squaredNorm() + (a.B - b.B).squaredNorm());
}

bool is_finite(const Matrix& m) { return m.allFinite(); }

bool is_symmetric_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
  return lo > kSymmetryTol * hi;
}

bool has_full_column_rank(const Matrix& B) {
  if (B.cols() > B.rows() || B.size() == 0) return false;
  Eigen::JacobiSVD<Matrix> svd(B);
  const auto& s = svd.singularValues();
  return s.minCoeff() >= kRankTol * s.maxCoeff() && s.maxCoeff() > 0.0;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  if (violations.empty()) {
    os << "valid";
  } else {
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i) os << "; ";
      os << violations[i];
    }
  }
  if (!b_full_column_rank) os << " (B* rank-deficient)";
  return os.str();
}

ValidationReport validate_problem(const LqProblem& p) {
  ValidationReport r;
  auto fail = [&](std::string msg) { r.violations.push_back(std::move(msg)); };

  if (!(p.T > 0.0) || !std::isfinite(p.T)) fail("T > 0");
  if (p.n < 1) fail("n >= 1");
  if (p.d < 1) fail("d >= 1");
  if (p.n < 1 || p.d < 1) return r;

  const auto& th = p.theta_star;
  const auto before_shapes = r.violations.size();
  if (th.A.rows() != p.n || th.A.cols() != p.n) fail("A_star is n x n");
  if (th.B.rows() != p.n || th.B.cols() != p.d) fail("B_star is n x d");
  if (p.x0.size() != p.n) fail("x0 has n entries");
  if (p.cost.Q.rows() != p.n || p.cost.Q.cols() != p.n) fail("Q is n x n");
  if (p.cost.R.rows() != p.d || p.cost.R.cols() != p.d) fail("R is d x d");
  if (r.violations.size() != before_shapes) return r;

  if (!th.A.allFinite() || !th.B.allFinite()) fail("theta_star entries finite");
  if (!p.x0.allFinite()) fail("x0 entries finite");
  if (!is_symmetric_positive_definite(p.cost.Q)) fail("Q symmetric positive definite");
  if (!is_symmetric_positive_definite(p.cost.R)) fail("R symmetric positive definite");

  if (th.B.allFinite()) {
    Eigen::JacobiSVD<Matrix> svd(th.B);
    const auto& s = svd.singularValues();
    r.b_max_singular = s.maxCoeff();
    r.b_min_singular = p.d > p.n ? 0.0 : s.minCoeff();
    r.b_full_column_rank = p.d <= p.n && r.b_min_singular >= kRankTol * r.b_max_singular &&
                           r.b_max_singular > 0.0;
  }
  return r;
}

void require_valid(const LqProblem& p) {
  const auto report = validate_problem(p);
  if (!report.ok()) throw std::invalid_argument("invalid LQ problem: " + report.summary());
}

std::vector<double> uniform_grid(double T, int steps) {
  if (steps < 1) throw std::invalid_argument("uniform_grid: steps must be >= 1");
  std::vector<double> grid(steps + 1);
  for (int i = 0; i <= steps; ++i) grid[i] = T * static_cast<double>(i) / steps;
  grid.back() = T;
  return grid;
}

GainPath::GainPath(GainKind kind, std::vector<double> grid, std::vector<Matrix> values)
    : kind_(kind), grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() < 2) throw std::invalid_argument("GainPath: grid needs at least 2 nodes");
  if (grid_.front() != 0.0) throw std::invalid_argument("GainPath: grid must start at 0");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      throw std::invalid_argument("GainPath: grid must be strictly increasing");
    }
  }
  const std::size_t expected = kind_ == GainKind::ContinuousGrid ? grid_.size() : grid_.size() - 1;
  if (values_.size() != expected) throw std::invalid_argument("GainPath: wrong number of values");
  for (const auto& v : values_) {
    if (v.rows() != values_.front().rows() || v.cols() != values_.front().cols()) {
      throw std::invalid_argument("GainPath: inconsistent value shapes");
    }
    if (!v.allFinite()) throw std::invalid_argument("GainPath: non-finite gain value");
  }
}

GainPath GainPath::zero(int d, int n, double T) {
  return GainPath(GainKind::PiecewiseConstant, {0.0, T}, {Matrix::Zero(d, n)});
}

int GainPath::interval_index(double t) const {
  const double T = grid_.back();
  if (t < -kBreakpointTol * T || t > T * (1.0 + kBreakpointTol)) {
    throw std::out_of_range("GainPath: time outside [0, T]");
  }
  const double snapped = t + kBreakpointTol * T;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), snapped);
  int idx = static_cast<int>(it - grid_.begin()) - 1;
  return std::clamp(idx, 0, intervals() - 1);
}

Matrix GainPath::at(double t) const {
  const int i = interval_index(t);
  if (kind_ == GainKind::PiecewiseConstant) return values_[i];
  const double t0 = grid_[i];
  const double t1 = grid_[i + 1];
  const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  if (w == 0.0) return values_[i];
  if (w == 1.0) return values_[i + 1];
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

}  // namespace lqrl
