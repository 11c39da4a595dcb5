#include "lqrl/estimation.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lqrl {

namespace {
constexpr double kGridTol = 1e-9;

void check_shared_grid(std::span<const EpisodeTrajectory> trajs) {
  if (trajs.empty()) throw std::invalid_argument("stats: no trajectories");
  const auto& ref = trajs.front();
  for (const auto& t : trajs) {
    if (t.times.size() != ref.times.size() || t.states.rows() != ref.states.rows() ||
        t.controls.rows() != ref.controls.rows() ||
        t.states.cols() != static_cast<Eigen::Index>(t.times.size()) ||
        t.controls.cols() != static_cast<Eigen::Index>(t.times.size())) {
      throw std::invalid_argument("stats: trajectories have inconsistent shapes");
    }
    for (std::size_t k = 0; k < t.times.size(); ++k) {
      if (t.times[k] != ref.times[k]) {
        throw std::invalid_argument("stats: trajectories do not share one grid");
      }
    }
  }
}

Vector z_at(const EpisodeTrajectory& t, Eigen::Index k) {
  const auto n = t.states.rows();
  const auto d = t.controls.rows();
  Vector z(n + d);
  z.head(n) = t.states.col(k);
  z.tail(d) = t.controls.col(k);
  return z;
}

// Fine-grid index of every coarse node t_i = iT/N.
std::vector<Eigen::Index> coarse_indices(const std::vector<double>& times, int N) {
  if (N < 1) throw std::invalid_argument("stats: N must be >= 1");
  const double T = times.back();
  std::vector<Eigen::Index> idx(N + 1);
  for (int i = 0; i <= N; ++i) {
    const double t = T * static_cast<double>(i) / N;
    auto it = std::lower_bound(times.begin(), times.end(), t - kGridTol * T);
    if (it == times.end() || std::abs(*it - t) > kGridTol * T) {
      throw std::invalid_argument("stats: coarse node t = " + std::to_string(t) +
                                  " is not on the fine grid");
    }
    idx[i] = it - times.begin();
  }
  return idx;
}

Matrix stacked_gain(const Matrix& K) {
  const auto n = K.cols();
  Matrix M(n + K.rows(), n);
  M.topRows(n) = Matrix::Identity(n, n);
  M.bottomRows(K.rows()) = K;
  return M;
}

}  // namespace

SufficientStats accumulate_stats_continuous(std::span<const EpisodeTrajectory> trajs) {
  check_shared_grid(trajs);
  const auto n = trajs.front().states.rows();
  const auto p = n + trajs.front().controls.rows();
  const auto& times = trajs.front().times;
  SufficientStats s{Matrix::Zero(p, p), Matrix::Zero(p, n), static_cast<long long>(trajs.size())};
  for (const auto& t : trajs) {
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      const Vector z = z_at(t, k);
      s.V.noalias() += (times[k + 1] - times[k]) * z * z.transpose();
      s.Y.noalias() += z * (t.states.col(k + 1) - t.states.col(k)).transpose();
    }
  }
  s.V /= static_cast<double>(s.m);
  s.Y /= static_cast<double>(s.m);
  return s;
}

SufficientStats accumulate_stats_discrete(std::span<const EpisodeTrajectory> trajs, int N) {
  check_shared_grid(trajs);
  const auto idx = coarse_indices(trajs.front().times, N);
  const auto n = trajs.front().states.rows();
  const auto p = n + trajs.front().controls.rows();
  const double tau = trajs.front().times.back() / N;
  SufficientStats s{Matrix::Zero(p, p), Matrix::Zero(p, n), static_cast<long long>(trajs.size())};
  for (const auto& t : trajs) {
    for (int i = 0; i < N; ++i) {
      const Vector z = z_at(t, idx[i]);
      s.V.noalias() += tau * z * z.transpose();
      s.Y.noalias() += z * (t.states.col(idx[i + 1]) - t.states.col(idx[i])).transpose();
    }
  }
  s.V /= static_cast<double>(s.m);
  s.Y /= static_cast<double>(s.m);
  return s;
}

SufficientStats stats_from_summaries(std::span<const EpisodeSummary> summaries, Regime regime) {
  if (summaries.empty()) throw std::invalid_argument("stats: no episode summaries");
  const bool cont = regime == Regime::Continuous;
  const auto& first = cont ? summaries.front().V_continuous : summaries.front().V_discrete;
  if (first.size() == 0) throw std::invalid_argument("stats: summaries lack discrete sums");
  const auto& firstY = cont ? summaries.front().Y_continuous : summaries.front().Y_discrete;
  SufficientStats s{Matrix::Zero(first.rows(), first.cols()),
                    Matrix::Zero(firstY.rows(), firstY.cols()),
                    static_cast<long long>(summaries.size())};
  for (const auto& e : summaries) {
    s.V += cont ? e.V_continuous : e.V_discrete;
    s.Y += cont ? e.Y_continuous : e.Y_discrete;
  }
  s.V /= static_cast<double>(s.m);
  s.Y /= static_cast<double>(s.m);
  return s;
}

ModelTheta ls_estimate(const SufficientStats& stats) {
  if (stats.m < 1) throw std::invalid_argument("ls_estimate: m must be >= 1");
  const auto p = stats.V.rows();
  if (stats.V.cols() != p || stats.Y.rows() != p || stats.Y.cols() < 1 || stats.Y.cols() >= p) {
    throw std::invalid_argument("ls_estimate: inconsistent statistic shapes");
  }
  if (!stats.V.allFinite() || !stats.Y.allFinite()) {
    throw NumericalBlowup("ls_estimate: non-finite statistics");
  }
  const Matrix regularized = stats.V + Matrix::Identity(p, p) / static_cast<double>(stats.m);
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("ls_estimate: V + I/m is not positive definite");
  }
  const Matrix stacked = llt.solve(stats.Y);
  if (!stacked.allFinite()) throw NumericalBlowup("ls_estimate: non-finite estimate");
  return unstack_theta(stacked, static_cast<int>(stats.Y.cols()));
}

Matrix ridge_objective_gradient(const ModelTheta& theta, std::span<const EpisodeTrajectory> trajs,
                                Regime regime, int N) {
  check_shared_grid(trajs);
  const Matrix th = stack_theta(theta);
  const auto& times = trajs.front().times;
  if (th.rows() != trajs.front().states.rows() + trajs.front().controls.rows() ||
      th.cols() != trajs.front().states.rows()) {
    throw std::invalid_argument("ridge_objective_gradient: theta has wrong shape");
  }
  const double m = static_cast<double>(trajs.size());
  Matrix grad = Matrix::Zero(th.rows(), th.cols());

  if (regime == Regime::Continuous) {
    // d/dtheta of h |dX/h - theta^T Z|^2 = -2 Z (dX - h theta^T Z)^T
    for (const auto& t : trajs) {
      for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double h = times[k + 1] - times[k];
        const Vector z = z_at(t, k);
        const Vector residual = (t.states.col(k + 1) - t.states.col(k)) - h * th.transpose() * z;
        grad.noalias() -= 2.0 * z * residual.transpose();
      }
    }
    grad += 2.0 * th;
    return grad / (2.0 * m);
  }

  const auto idx = coarse_indices(times, N);
  const double tau = times.back() / N;
  // d/dtheta of |dX - tau theta^T Z|^2 = -2 tau Z (dX - tau theta^T Z)^T
  for (const auto& t : trajs) {
    for (int i = 0; i < N; ++i) {
      const Vector z = z_at(t, idx[i]);
      const Vector residual =
          (t.states.col(idx[i + 1]) - t.states.col(idx[i])) - tau * th.transpose() * z;
      grad.noalias() -= 2.0 * tau * z * residual.transpose();
    }
  }
  grad += 2.0 * tau * th;
  return grad / (2.0 * m * tau);
}

Matrix ridge_gradient_from_stats(const ModelTheta& theta, const SufficientStats& stats) {
  const Matrix th = stack_theta(theta);
  const auto p = stats.V.rows();
  return (stats.V + Matrix::Identity(p, p) / static_cast<double>(stats.m)) * th - stats.Y;
}

double ridge_certificate(const Matrix& gradient, const SufficientStats& stats) {
  return gradient.cwiseAbs().maxCoeff() / (1.0 + stats.Y.norm());
}

PopulationStats population_stats(const LqProblem& problem, const GainPath& K, Regime regime, int N,
                                 int steps) {
  require_valid(problem);
  const int n = problem.n;
  const int d = problem.d;
  const int p = n + d;
  if (K.state_dim() != n || K.control_dim() != d) {
    throw std::invalid_argument("population_stats: gain has wrong shape");
  }
  if (std::abs(K.horizon() - problem.T) > kGridTol * problem.T) {
    throw std::invalid_argument("population_stats: gain is not defined on [0, T]");
  }
  if (steps < 1) throw std::invalid_argument("population_stats: steps must be >= 1");
  const Matrix& A = problem.theta_star.A;
  const Matrix& B = problem.theta_star.B;
  const Matrix I = Matrix::Identity(n, n);

  auto sigma_rhs = [&](const Matrix& S, const Matrix& L) -> Matrix {
    return L * S + S * L.transpose() + I;
  };

  PopulationStats out{Matrix::Zero(p, p), Matrix::Zero(p, n)};
  Matrix Sigma = problem.x0 * problem.x0.transpose();

  if (regime == Regime::Continuous) {
    // Augmented RK4 over (Sigma, V); the gain is frozen inside each piece of a
    // piecewise-constant K and sampled at t, t + h/2, t + h otherwise.
    auto advance = [&](double t0, double h, const Matrix& K0, const Matrix& Kmid,
                       const Matrix& K1) {
      const Matrix L0 = A + B * K0, Lm = A + B * Kmid, L1 = A + B * K1;
      const Matrix M0 = stacked_gain(K0), Mm = stacked_gain(Kmid), M1 = stacked_gain(K1);
      const Matrix s1 = sigma_rhs(Sigma, L0);
      const Matrix S2 = Sigma + 0.5 * h * s1;
      const Matrix s2 = sigma_rhs(S2, Lm);
      const Matrix S3 = Sigma + 0.5 * h * s2;
      const Matrix s3 = sigma_rhs(S3, Lm);
      const Matrix S4 = Sigma + h * s3;
      const Matrix s4 = sigma_rhs(S4, L1);
      out.V += (h / 6.0) * (M0 * Sigma * M0.transpose() + 2.0 * Mm * S2 * Mm.transpose() +
                            2.0 * Mm * S3 * Mm.transpose() + M1 * S4 * M1.transpose());
      Sigma += (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
      Sigma = 0.5 * (Sigma + Sigma.transpose()).eval();
      if (!Sigma.allFinite()) {
        throw NumericalBlowup("population_stats: non-finite second moment at t = " +
                              std::to_string(t0 + h));
      }
    };
    if (K.kind() == GainKind::ContinuousGrid) {
      const auto grid = uniform_grid(problem.T, steps);
      for (int j = 0; j < steps; ++j) {
        const double t0 = grid[j], t1 = grid[j + 1];
        advance(t0, t1 - t0, K.at(t0), K.at(0.5 * (t0 + t1)), K.at(t1));
      }
    } else {
      const int pieces = K.intervals();
      const int sub = std::max(20, (steps + pieces - 1) / pieces);
      for (int i = 0; i < pieces; ++i) {
        const double h = (K.grid()[i + 1] - K.grid()[i]) / sub;
        const Matrix& Ki = K.values()[i];
        for (int k = 0; k < sub; ++k) advance(K.grid()[i] + k * h, h, Ki, Ki, Ki);
      }
    }
    out.V = 0.5 * (out.V + out.V.transpose()).eval();
    out.Y = out.V * stack_theta(problem.theta_star);
    return out;
  }

  if (K.kind() != GainKind::PiecewiseConstant || K.intervals() != N || N < 1) {
    throw std::invalid_argument(
        "population_stats: discrete regime needs a piecewise-constant gain with N intervals");
  }
  const double tau = problem.T / N;
  for (int i = 0; i <= N; ++i) {
    if (std::abs(K.grid()[i] - i * tau) > kGridTol * problem.T) {
      throw std::invalid_argument("population_stats: gain breakpoints are not the uniform grid");
    }
  }
  const int sub = std::max(20, (steps + N - 1) / N);
  const double h = tau / sub;
  for (int i = 0; i < N; ++i) {
    const Matrix& Ki = K.values()[i];
    const Matrix L = A + B * Ki;
    const Matrix M = stacked_gain(Ki);
    const Matrix transition = (L * tau).exp();
    out.V += tau * M * Sigma * M.transpose();
    out.Y += M * Sigma * (transition - I).transpose();
    for (int k = 0; k < sub; ++k) {
      const Matrix s1 = sigma_rhs(Sigma, L);
      const Matrix s2 = sigma_rhs(Sigma + 0.5 * h * s1, L);
      const Matrix s3 = sigma_rhs(Sigma + 0.5 * h * s2, L);
      const Matrix s4 = sigma_rhs(Sigma + h * s3, L);
      Sigma += (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
      Sigma = 0.5 * (Sigma + Sigma.transpose()).eval();
    }
    if (!Sigma.allFinite()) throw NumericalBlowup("population_stats: non-finite second moment");
  }
  out.V = 0.5 * (out.V + out.V.transpose()).eval();
  return out;
}

void write_stats_csv(std::ostream& out, const SufficientStats& stats) {
  const auto old_precision = out.precision(17);
  out << "kind,row,col,value\n";
  for (int i = 0; i < stats.V.rows(); ++i)
    for (int j = 0; j < stats.V.cols(); ++j) out << "V," << i << ',' << j << ',' << stats.V(i, j) << '\n';
  for (int i = 0; i < stats.Y.rows(); ++i)
    for (int j = 0; j < stats.Y.cols(); ++j) out << "Y," << i << ',' << j << ',' << stats.Y(i, j) << '\n';
  out << "m,0,0," << stats.m << '\n';
  out.precision(old_precision);
}

}  // namespace lqrl
