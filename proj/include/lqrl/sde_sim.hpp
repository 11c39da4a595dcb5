#pragma once

#include "lqrl/lq_model.hpp"
#include "lqrl/riccati.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace lqrl {

struct SimConfig {
  double h_sim = 1e-3;
  std::uint64_t master_seed = 0;
};

/// Number of fine steps T / h_sim. Throws std::invalid_argument unless
/// h_sim > 0 and T / h_sim is within 1e-9 (relative) of an integer.
int fine_step_count(const SimConfig& cfg, double T);

/// One episode on the fine grid. Column k of `states` / `controls` is the
/// value at times[k]; column k of `increments` is W(times[k+1]) - W(times[k]).
struct EpisodeTrajectory {
  std::vector<double> times;
  Matrix states;      // n x (F+1)
  Matrix controls;    // d x (F+1), U_k = K(s_k) X_k
  Matrix increments;  // n x F
};

/// Per-episode sums feeding the least-squares estimators, produced without
/// storing the trajectory. Sums are not divided by the episode count.
struct EpisodeSummary {
  Matrix V_continuous;  // sum_k Z_k Z_k^T h
  Matrix Y_continuous;  // sum_k Z_k (X_{k+1} - X_k)^T
  Matrix V_discrete;    // sum_i Z_{t_i} Z_{t_i}^T tau   (empty without a coarse grid)
  Matrix Y_discrete;    // sum_i Z_{t_i} (X_{t_{i+1}} - X_{t_i})^T
  double realized_cost = 0.0;
};

/// Euler-Maruyama simulator for dX = (A* X + B* K_t X) dt + dW with the gain
/// schedule precomputed on the fine grid. Episode (phase, j) draws its
/// increments from SubstreamRng(master_seed, phase, j), n normals per step in
/// coordinate order, so results do not depend on call order or threading.
class EpisodeSimulator {
 public:
  EpisodeSimulator(const LqProblem& problem, const GainPath& K, const SimConfig& cfg);

  int fine_steps() const { return steps_; }
  double step() const { return h_; }

  EpisodeTrajectory trajectory(std::uint32_t phase, std::uint32_t episode) const;

  /// `coarse_N` = 0 skips the discrete sums; otherwise it must divide the
  /// fine step count.
  EpisodeSummary summarize(std::uint32_t phase, std::uint32_t episode, int coarse_N) const;

 private:
  template <class Sink>
  void run(std::uint32_t phase, std::uint32_t episode, Sink& sink) const;

  int n_;
  int d_;
  int steps_;
  double h_;
  double T_;
  std::uint64_t seed_;
  Vector x0_;
  Matrix A_;
  Matrix B_;
  Matrix Q_;
  Matrix R_;
  std::vector<double> times_;
  std::vector<double> gains_;  // d x n column-major block per node, F+1 nodes
};

EpisodeTrajectory simulate_episode(const LqProblem& problem, const GainPath& K,
                                   const SimConfig& cfg, std::uint32_t phase,
                                   std::uint32_t episode);

/// Left-Riemann sum of X^T Q X + U^T R U over [0, T).
double realized_cost(const EpisodeTrajectory& traj, const CostSpec& cost);

/// Episodes 0..m-1 of `phase`, in episode order.
std::vector<EpisodeTrajectory> batch_simulate(const LqProblem& problem, const GainPath& K,
                                              const SimConfig& cfg, std::uint32_t phase, int m);

/// Summaries of episodes 0..m-1 of `phase`, in episode order.
std::vector<EpisodeSummary> batch_summarize(const LqProblem& problem, const GainPath& K,
                                            const SimConfig& cfg, std::uint32_t phase, int m,
                                            int coarse_N);

/// CSV with columns t, x_<i>..., u_<j>...
void write_trajectory_csv(std::ostream& out, const EpisodeTrajectory& traj);

}  // namespace lqrl
