#include "lqrl/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lqrl {

namespace {

void symmetrize(Matrix& P) { P = 0.5 * (P + P.transpose()).eval(); }

void check_cost(const ModelTheta& theta, const CostSpec& cost) {
  const int n = theta.state_dim();
  const int d = theta.control_dim();
  if (theta.A.cols() != n || theta.B.rows() != n || cost.Q.rows() != n || cost.Q.cols() != n ||
      cost.R.rows() != d || cost.R.cols() != d) {
    throw std::invalid_argument("riccati: inconsistent dimensions of theta and cost");
  }
}

Eigen::LLT<Matrix> factor_spd(const Matrix& M, const char* what) {
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(what) + ": matrix is not positive definite");
  }
  return llt;
}

double trace_trapezoid(const std::vector<double>& grid, const std::vector<Matrix>& S) {
  double integral = 0.0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    integral += 0.5 * (grid[j + 1] - grid[j]) * (S[j].trace() + S[j + 1].trace());
  }
  return integral;
}

// dS/ds for s = T - t of the cost-to-go under closed loop L with running
// weight W = Q + K^T R K.
Matrix lyapunov_rhs(const Matrix& S, const Matrix& L, const Matrix& W) {
  return L.transpose() * S + S * L + W;
}

}  // namespace

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

RiccatiPath solve_riccati_continuous(const ModelTheta& theta, const CostSpec& cost, double T,
                                     int steps) {
  check_cost(theta, cost);
  if (steps < 2) throw std::invalid_argument("solve_riccati_continuous: need at least 2 steps");
  if (!(T > 0.0)) throw std::invalid_argument("solve_riccati_continuous: T must be positive");

  const Matrix& A = theta.A;
  const Matrix S = theta.B * factor_spd(cost.R, "R").solve(theta.B.transpose());
  auto rhs = [&](const Matrix& P) -> Matrix {
    return A.transpose() * P + P * A - P * S * P + cost.Q;
  };

  RiccatiPath path;
  path.grid = uniform_grid(T, steps);
  path.values.resize(steps + 1);
  const int n = theta.state_dim();
  Matrix P = Matrix::Zero(n, n);
  path.values[steps] = P;
  for (int j = steps; j > 0; --j) {
    const double h = path.grid[j] - path.grid[j - 1];
    const Matrix k1 = rhs(P);
    const Matrix k2 = rhs(P + 0.5 * h * k1);
    const Matrix k3 = rhs(P + 0.5 * h * k2);
    const Matrix k4 = rhs(P + h * k3);
    P += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    symmetrize(P);
    if (!P.allFinite()) {
      throw NumericalBlowup("solve_riccati_continuous: non-finite value at t = " +
                            std::to_string(path.grid[j - 1]));
    }
    path.values[j - 1] = P;
  }
  return path;
}

GainPath gain_from_riccati(const ModelTheta& theta, const CostSpec& cost, const RiccatiPath& path) {
  check_cost(theta, cost);
  const auto llt = factor_spd(cost.R, "R");
  const Matrix Bt = theta.B.transpose();
  std::vector<Matrix> K;
  K.reserve(path.values.size());
  for (const auto& P : path.values) K.push_back(-llt.solve(Bt * P));
  return GainPath(GainKind::ContinuousGrid, path.grid, std::move(K));
}

GainPath optimal_gain(const ModelTheta& theta, const CostSpec& cost, double T, int steps) {
  return gain_from_riccati(theta, cost, solve_riccati_continuous(theta, cost, T, steps));
}

namespace detail {

Matrix riccati_step_gamma_signed(const Matrix& P, const ModelTheta& theta, const CostSpec& cost,
                                 double tau, double correction_sign) {
  check_cost(theta, cost);
  if (!(tau > 0.0)) throw std::invalid_argument("riccati_step_gamma: tau must be positive");
  const int n = theta.state_dim();
  const Matrix F = Matrix::Identity(n, n) + tau * theta.A;
  const Matrix PF = P * F;
  const Matrix G = theta.B.transpose() * PF;  // B^T P F
  const Matrix M = cost.R + tau * theta.B.transpose() * P * theta.B;
  const auto llt = factor_spd(M, "R + tau B^T P B");
  Matrix out = tau * cost.Q + F.transpose() * PF - correction_sign * tau * G.transpose() * llt.solve(G);
  symmetrize(out);
  return out;
}

}  // namespace detail

Matrix riccati_step_gamma(const Matrix& P, const ModelTheta& theta, const CostSpec& cost,
                          double tau) {
  return detail::riccati_step_gamma_signed(P, theta, cost, tau, 1.0);
}

DiscreteRiccatiSolution solve_riccati_discrete(const ModelTheta& theta, const CostSpec& cost,
                                               double T, int N) {
  check_cost(theta, cost);
  if (N < 1) throw std::invalid_argument("solve_riccati_discrete: N must be >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("solve_riccati_discrete: T must be positive");
  const int n = theta.state_dim();
  const double tau = T / N;
  const Matrix F = Matrix::Identity(n, n) + tau * theta.A;
  const Matrix Bt = theta.B.transpose();

  RiccatiPath path;
  path.grid = uniform_grid(T, N);
  path.values.resize(N + 1);
  path.values[N] = Matrix::Zero(n, n);
  std::vector<Matrix> gains(N);
  for (int i = N - 1; i >= 0; --i) {
    const Matrix& next = path.values[i + 1];
    const Matrix M = cost.R + tau * Bt * next * theta.B;
    gains[i] = -factor_spd(M, "R + tau B^T P B").solve(Bt * next * F);
    path.values[i] = riccati_step_gamma(next, theta, cost, tau);
    if (!path.values[i].allFinite()) {
      throw NumericalBlowup("solve_riccati_discrete: non-finite value at step " + std::to_string(i));
    }
  }
  GainPath gain(GainKind::PiecewiseConstant, path.grid, std::move(gains));
  return {std::move(path), std::move(gain)};
}

double lyapunov_cost(const ModelTheta& theta_star, const CostSpec& cost, const GainPath& K,
                     const Vector& x0, double T, int steps, int substeps) {
  check_cost(theta_star, cost);
  const int n = theta_star.state_dim();
  if (K.state_dim() != n || K.control_dim() != theta_star.control_dim()) {
    throw std::invalid_argument("lyapunov_cost: gain has wrong shape");
  }
  if (x0.size() != n) throw std::invalid_argument("lyapunov_cost: x0 has wrong size");
  if (std::abs(K.horizon() - T) > 1e-9 * T) {
    throw std::invalid_argument("lyapunov_cost: gain is not defined on [0, T]");
  }
  if (steps < 1 || substeps < 1) throw std::invalid_argument("lyapunov_cost: bad step counts");

  const Matrix& A = theta_star.A;
  const Matrix& B = theta_star.B;
  auto closed_loop = [&](const Matrix& k, Matrix& L, Matrix& W) {
    L = A + B * k;
    W = cost.Q + k.transpose() * cost.R * k;
  };

  std::vector<double> grid;
  std::vector<Matrix> S_nodes;
  Matrix S = Matrix::Zero(n, n);
  Matrix L1, W1, L2, W2, L3, W3;

  auto rk4_step = [&](double h) {
    // L1/W1 at the right end, L2/W2 at the midpoint, L3/W3 at the left end.
    const Matrix k1 = lyapunov_rhs(S, L1, W1);
    const Matrix k2 = lyapunov_rhs(S + 0.5 * h * k1, L2, W2);
    const Matrix k3 = lyapunov_rhs(S + 0.5 * h * k2, L2, W2);
    const Matrix k4 = lyapunov_rhs(S + h * k3, L3, W3);
    S += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    symmetrize(S);
    if (!S.allFinite()) throw NumericalBlowup("lyapunov_cost: non-finite cost-to-go");
  };

  if (K.kind() == GainKind::ContinuousGrid) {
    grid = uniform_grid(T, steps);
    S_nodes.resize(steps + 1);
    S_nodes[steps] = S;
    for (int j = steps; j > 0; --j) {
      const double t0 = grid[j - 1];
      const double t1 = grid[j];
      closed_loop(K.at(t1), L1, W1);
      closed_loop(K.at(0.5 * (t0 + t1)), L2, W2);
      closed_loop(K.at(t0), L3, W3);
      rk4_step(t1 - t0);
      S_nodes[j - 1] = S;
    }
  } else {
    const int pieces = K.intervals();
    const int sub = std::max(substeps, (steps + pieces - 1) / pieces);
    const auto& bp = K.grid();
    grid.resize(pieces * sub + 1);
    S_nodes.resize(pieces * sub + 1);
    for (int i = 0; i < pieces; ++i) {
      for (int k = 0; k < sub; ++k) {
        grid[i * sub + k] = bp[i] + (bp[i + 1] - bp[i]) * static_cast<double>(k) / sub;
      }
    }
    grid.back() = bp.back();
    S_nodes.back() = S;
    for (int i = pieces - 1; i >= 0; --i) {
      closed_loop(K.values()[i], L1, W1);
      L2 = L1;
      W2 = W1;
      L3 = L1;
      W3 = W1;
      for (int k = sub; k > 0; --k) {
        const int j = i * sub + k;
        rk4_step(grid[j] - grid[j - 1]);
        S_nodes[j - 1] = S;
      }
    }
  }
  return x0.dot(S_nodes.front() * x0) + trace_trapezoid(grid, S_nodes);
}

double optimal_cost(const LqProblem& problem, int steps) {
  const auto path = solve_riccati_continuous(problem.theta_star, problem.cost, problem.T, steps);
  return problem.x0.dot(path.values.front() * problem.x0) + trace_trapezoid(path.grid, path.values);
}

void write_path_csv(std::ostream& out, const std::vector<double>& grid,
                    const std::vector<Matrix>& values, const char* prefix) {
  if (values.empty()) return;
  const auto old_precision = out.precision(17);
  out << 't';
  for (int i = 0; i < values.front().rows(); ++i)
    for (int j = 0; j < values.front().cols(); ++j) out << ',' << prefix << '_' << i << '_' << j;
  out << '\n';
  for (std::size_t k = 0; k < values.size(); ++k) {
    out << grid[k];
    for (int i = 0; i < values[k].rows(); ++i)
      for (int j = 0; j < values[k].cols(); ++j) out << ',' << values[k](i, j);
    out << '\n';
  }
  out.precision(old_precision);
}

void write_gain_csv(std::ostream& out, const GainPath& gain) {
  // Piecewise gains are written at the left end of each interval.
  write_path_csv(out, gain.grid(), gain.values(), "K");
}

}  // namespace lqrl
