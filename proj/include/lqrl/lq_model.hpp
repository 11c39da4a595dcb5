#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace lqrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Drift parameters of dX = (A X + B U) dt + dW.
struct ModelTheta {
  Matrix A;  // n x n
  Matrix B;  // n x d

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }
};

struct CostSpec {
  Matrix Q;  // n x n, symmetric positive definite
  Matrix R;  // d x d, symmetric positive definite
};

struct LqProblem {
  int n = 0;
  int d = 0;
  double T = 0.0;
  Vector x0;
  ModelTheta theta_star;
  CostSpec cost;
};

/// Stacks theta into the (n+d) x n matrix [A^T; B^T], so that
/// stacked^T * (x; u) = A x + B u.
Matrix stack_theta(const ModelTheta& theta);

/// Inverse of stack_theta. `n` is the state dimension; d = rows - n.
ModelTheta unstack_theta(const Matrix& stacked, int n);

/// Frobenius norm of the stacked difference. Throws std::invalid_argument on
/// a dimension mismatch.
double theta_distance(const ModelTheta& a, const ModelTheta& b);

bool is_finite(const Matrix& m);

/// True when M is symmetric (within 1e-12 relative) with smallest eigenvalue
/// strictly above 1e-12 relative to its largest.
bool is_symmetric_positive_definite(const Matrix& m);

struct ValidationReport {
  std::vector<std::string> violations;
  bool b_full_column_rank = false;
  double b_min_singular = 0.0;
  double b_max_singular = 0.0;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Lists every violated invariant of `p`. Rank deficiency of B* is reported
/// in `b_full_column_rank` but is not a violation.
ValidationReport validate_problem(const LqProblem& p);

/// Throws std::invalid_argument carrying the report summary when `p` is invalid.
void require_valid(const LqProblem& p);

/// True when B has full column rank: smallest singular value >= 1e-10 x largest.
bool has_full_column_rank(const Matrix& B);

enum class GainKind { ContinuousGrid, PiecewiseConstant };

/// Time-indexed feedback gain K_t (d x n) on [0, T].
///
/// ContinuousGrid stores one value per grid node and interpolates linearly.
/// PiecewiseConstant stores one value per interval [t_i, t_{i+1}) and is
/// right-continuous; t = T maps to the last interval. Breakpoints are matched
/// with a 1e-9 relative tolerance so times computed as k*h land on the
/// intended side of a node.
class GainPath {
 public:
  GainPath(GainKind kind, std::vector<double> grid, std::vector<Matrix> values);

  static GainPath zero(int d, int n, double T);

  GainKind kind() const { return kind_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<Matrix>& values() const { return values_; }
  double horizon() const { return grid_.back(); }
  int control_dim() const { return static_cast<int>(values_.front().rows()); }
  int state_dim() const { return static_cast<int>(values_.front().cols()); }

  /// Number of constant pieces (PiecewiseConstant) or grid steps (ContinuousGrid).
  int intervals() const { return static_cast<int>(grid_.size()) - 1; }

  Matrix at(double t) const;

  /// Index i of the interval [t_i, t_{i+1}) containing t (last interval for t = T).
  int interval_index(double t) const;

 private:
  GainKind kind_;
  std::vector<double> grid_;
  std::vector<Matrix> values_;
};

/// Uniform grid of `steps` + 1 nodes over [0, T], last node exactly T.
std::vector<double> uniform_grid(double T, int steps);

}  // namespace lqrl
