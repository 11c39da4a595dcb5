#include "lqrl/sde_sim.hpp"

#include "lqrl/parallel.hpp"
#include "lqrl/rng.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lqrl {

namespace {
constexpr double kGridTol = 1e-9;

bool on_grid(double t, double h, int steps) {
  const double k = t / h;
  return std::abs(k - std::round(k)) <= kGridTol * std::max(1, steps);
}

struct TrajectorySink {
  EpisodeTrajectory& traj;
  int n;
  int d;

  void node(int k, const double* x, const double* u) {
    for (int i = 0; i < n; ++i) traj.states(i, k) = x[i];
    for (int i = 0; i < d; ++i) traj.controls(i, k) = u[i];
  }
  void step(int k, const double* x, const double* u, const double* dw, const double* xn) {
    (void)x;
    (void)u;
    (void)xn;
    for (int i = 0; i < n; ++i) traj.increments(i, k) = dw[i];
  }
};

struct SummarySink {
  EpisodeSummary& s;
  int n;
  int d;
  double h;
  const Matrix& Q;
  const Matrix& R;
  int steps;
  int sub = 0;  // fine steps per coarse interval, 0 = no discrete sums
  double tau = 0.0;
  std::vector<double> z;
  std::vector<double> z_prev;
  std::vector<double> x_prev;

  void node(int k, const double* x, const double* u) {
    if (sub == 0 || k % sub != 0) return;
    const int p = n + d;
    if (k > 0) {
      for (int a = 0; a < p; ++a)
        for (int c = 0; c < n; ++c) s.Y_discrete(a, c) += z_prev[a] * (x[c] - x_prev[c]);
    }
    if (k < steps) {
      for (int i = 0; i < n; ++i) z_prev[i] = x[i];
      for (int i = 0; i < d; ++i) z_prev[n + i] = u[i];
      for (int b = 0; b < p; ++b)
        for (int a = 0; a <= b; ++a) s.V_discrete(a, b) += tau * z_prev[a] * z_prev[b];
      for (int i = 0; i < n; ++i) x_prev[i] = x[i];
    }
  }

  void step(int, const double* x, const double* u, const double*, const double* xn) {
    const int p = n + d;
    for (int i = 0; i < n; ++i) z[i] = x[i];
    for (int i = 0; i < d; ++i) z[n + i] = u[i];
    for (int b = 0; b < p; ++b)
      for (int a = 0; a <= b; ++a) s.V_continuous(a, b) += h * z[a] * z[b];
    for (int c = 0; c < n; ++c) {
      const double dx = xn[c] - x[c];
      for (int a = 0; a < p; ++a) s.Y_continuous(a, c) += z[a] * dx;
    }
    double running = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) running += x[i] * Q(i, j) * x[j];
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) running += u[i] * R(i, j) * u[j];
    s.realized_cost += running * h;
  }
};

void mirror_upper(Matrix& V) { V.triangularView<Eigen::StrictlyLower>() = V.transpose(); }

}  // namespace

int fine_step_count(const SimConfig& cfg, double T) {
  if (!(cfg.h_sim > 0.0) || !std::isfinite(cfg.h_sim)) {
    throw std::invalid_argument("SimConfig: h_sim must be positive");
  }
  const double ratio = T / cfg.h_sim;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > kGridTol * ratio) {
    throw std::invalid_argument("SimConfig: h_sim must divide T (T/h_sim = " +
                                std::to_string(ratio) + ")");
  }
  return static_cast<int>(rounded);
}

EpisodeSimulator::EpisodeSimulator(const LqProblem& problem, const GainPath& K,
                                   const SimConfig& cfg)
    : n_(problem.n),
      d_(problem.d),
      steps_(fine_step_count(cfg, problem.T)),
      h_(problem.T / steps_),
      T_(problem.T),
      seed_(cfg.master_seed),
      x0_(problem.x0),
      A_(problem.theta_star.A),
      B_(problem.theta_star.B),
      Q_(problem.cost.Q),
      R_(problem.cost.R) {
  if (K.state_dim() != n_ || K.control_dim() != d_) {
    throw std::invalid_argument("EpisodeSimulator: gain has wrong shape");
  }
  if (std::abs(K.horizon() - T_) > kGridTol * T_) {
    throw std::invalid_argument("EpisodeSimulator: gain is not defined on [0, T]");
  }
  if (K.kind() == GainKind::PiecewiseConstant) {
    for (double b : K.grid()) {
      if (!on_grid(b, h_, steps_)) {
        throw std::invalid_argument("EpisodeSimulator: gain breakpoint " + std::to_string(b) +
                                    " is not on the fine grid");
      }
    }
  }
  times_ = uniform_grid(T_, steps_);
  gains_.resize(static_cast<std::size_t>(steps_ + 1) * d_ * n_);
  for (int k = 0; k <= steps_; ++k) {
    const Matrix Kk = K.at(times_[k]);
    std::copy(Kk.data(), Kk.data() + d_ * n_, gains_.begin() + static_cast<std::size_t>(k) * d_ * n_);
  }
}

template <class Sink>
void EpisodeSimulator::run(std::uint32_t phase, std::uint32_t episode, Sink& sink) const {
  SubstreamRng rng(seed_, phase, episode);
  std::vector<double> x(x0_.data(), x0_.data() + n_);
  std::vector<double> xn(n_), u(d_), dw(n_);
  const double sqrt_h = std::sqrt(h_);
  const double* A = A_.data();
  const double* B = B_.data();

  auto control = [&](int k) {
    const double* Kk = gains_.data() + static_cast<std::size_t>(k) * d_ * n_;
    for (int i = 0; i < d_; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n_; ++j) acc += Kk[i + j * d_] * x[j];
      u[i] = acc;
    }
  };

  for (int k = 0; k < steps_; ++k) {
    control(k);
    sink.node(k, x.data(), u.data());
    for (int i = 0; i < n_; ++i) dw[i] = sqrt_h * rng.normal();
    bool finite = true;
    for (int i = 0; i < n_; ++i) {
      double drift = 0.0;
      for (int j = 0; j < n_; ++j) drift += A[i + j * n_] * x[j];
      for (int j = 0; j < d_; ++j) drift += B[i + j * n_] * u[j];
      xn[i] = x[i] + drift * h_ + dw[i];
      finite = finite && std::isfinite(xn[i]);
    }
    if (!finite) {
      throw NumericalBlowup("simulate_episode: non-finite state at t = " +
                            std::to_string(times_[k + 1]) + " (phase " + std::to_string(phase) +
                            ", episode " + std::to_string(episode) + ")");
    }
    sink.step(k, x.data(), u.data(), dw.data(), xn.data());
    x.swap(xn);
  }
  control(steps_);
  sink.node(steps_, x.data(), u.data());
}

EpisodeTrajectory EpisodeSimulator::trajectory(std::uint32_t phase, std::uint32_t episode) const {
  EpisodeTrajectory traj;
  traj.times = times_;
  traj.states.resize(n_, steps_ + 1);
  traj.controls.resize(d_, steps_ + 1);
  traj.increments.resize(n_, steps_);
  TrajectorySink sink{traj, n_, d_};
  run(phase, episode, sink);
  return traj;
}

EpisodeSummary EpisodeSimulator::summarize(std::uint32_t phase, std::uint32_t episode,
                                           int coarse_N) const {
  const int p = n_ + d_;
  EpisodeSummary s;
  s.V_continuous = Matrix::Zero(p, p);
  s.Y_continuous = Matrix::Zero(p, n_);
  SummarySink sink{s, n_, d_, h_, Q_, R_, steps_, 0, 0.0, std::vector<double>(p), {}, {}};
  if (coarse_N > 0) {
    if (steps_ % coarse_N != 0) {
      throw std::invalid_argument("summarize: coarse grid of " + std::to_string(coarse_N) +
                                  " intervals does not embed in " + std::to_string(steps_) +
                                  " fine steps");
    }
    sink.sub = steps_ / coarse_N;
    sink.tau = T_ / coarse_N;
    sink.z_prev.resize(p);
    sink.x_prev.resize(n_);
    s.V_discrete = Matrix::Zero(p, p);
    s.Y_discrete = Matrix::Zero(p, n_);
  }
  run(phase, episode, sink);
  mirror_upper(s.V_continuous);
  if (coarse_N > 0) mirror_upper(s.V_discrete);
  return s;
}

EpisodeTrajectory simulate_episode(const LqProblem& problem, const GainPath& K,
                                   const SimConfig& cfg, std::uint32_t phase,
                                   std::uint32_t episode) {
  return EpisodeSimulator(problem, K, cfg).trajectory(phase, episode);
}

double realized_cost(const EpisodeTrajectory& traj, const CostSpec& cost) {
  const auto F = static_cast<Eigen::Index>(traj.times.size()) - 1;
  if (traj.states.rows() != cost.Q.rows() || traj.controls.rows() != cost.R.rows() ||
      traj.states.cols() != F + 1 || traj.controls.cols() != F + 1) {
    throw std::invalid_argument("realized_cost: inconsistent dimensions");
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < F; ++k) {
    const auto x = traj.states.col(k);
    const auto u = traj.controls.col(k);
    total += (x.dot(cost.Q * x) + u.dot(cost.R * u)) * (traj.times[k + 1] - traj.times[k]);
  }
  return total;
}

std::vector<EpisodeTrajectory> batch_simulate(const LqProblem& problem, const GainPath& K,
                                              const SimConfig& cfg, std::uint32_t phase, int m) {
  if (m < 1) throw std::invalid_argument("batch_simulate: m must be >= 1");
  const EpisodeSimulator sim(problem, K, cfg);
  std::vector<EpisodeTrajectory> out(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
    out[j] = sim.trajectory(phase, static_cast<std::uint32_t>(j));
  });
  return out;
}

std::vector<EpisodeSummary> batch_summarize(const LqProblem& problem, const GainPath& K,
                                            const SimConfig& cfg, std::uint32_t phase, int m,
                                            int coarse_N) {
  if (m < 1) throw std::invalid_argument("batch_summarize: m must be >= 1");
  const EpisodeSimulator sim(problem, K, cfg);
  std::vector<EpisodeSummary> out(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
    out[j] = sim.summarize(phase, static_cast<std::uint32_t>(j), coarse_N);
  });
  return out;
}

void write_trajectory_csv(std::ostream& out, const EpisodeTrajectory& traj) {
  const auto old_precision = out.precision(17);
  out << 't';
  for (int i = 0; i < traj.states.rows(); ++i) out << ",x_" << i;
  for (int i = 0; i < traj.controls.rows(); ++i) out << ",u_" << i;
  out << '\n';
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << traj.times[k];
    for (int i = 0; i < traj.states.rows(); ++i) out << ',' << traj.states(i, k);
    for (int i = 0; i < traj.controls.rows(); ++i) out << ',' << traj.controls(i, k);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lqrl
