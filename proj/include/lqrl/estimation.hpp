#pragma once

#include "lqrl/lq_model.hpp"
#include "lqrl/sde_sim.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace lqrl {

enum class Regime { Continuous, Discrete };

/// Episode-averaged statistics V = (1/m) sum int Z Z^T dt and
/// Y = (1/m) sum int Z dX^T, with Z = (X; U).
struct SufficientStats {
  Matrix V;  // (n+d) x (n+d)
  Matrix Y;  // (n+d) x n
  long long m = 0;
};

/// Left-Riemann / left-endpoint Ito sums on the fine grid of every trajectory.
/// Throws std::invalid_argument if the trajectories do not share one grid.
SufficientStats accumulate_stats_continuous(std::span<const EpisodeTrajectory> trajs);

/// Same sums sampled at the coarse nodes t_i = iT/N only (weight tau = T/N).
/// Throws std::invalid_argument when a coarse node is not a fine-grid node.
SufficientStats accumulate_stats_discrete(std::span<const EpisodeTrajectory> trajs, int N);

/// Averages per-episode summaries in episode order.
SufficientStats stats_from_summaries(std::span<const EpisodeSummary> summaries, Regime regime);

/// Ridge estimate (V + I/m)^{-1} Y.
ModelTheta ls_estimate(const SufficientStats& stats);

/// Gradient of the discretized ridge objective at `theta`, computed directly
/// from the trajectories and scaled so that it reads (V + I/m) theta - Y:
/// the continuous objective
///   sum_j sum_k |dX_k/h - theta^T Z_k|^2 h + tr(theta^T theta)
/// is divided by 2m, the discrete objective
///   sum_j sum_i |dX_i - tau theta^T Z_i|^2 + tau tr(theta^T theta)
/// by 2 m tau.
Matrix ridge_objective_gradient(const ModelTheta& theta, std::span<const EpisodeTrajectory> trajs,
                                Regime regime, int N = 0);

/// The same scaled gradient evaluated from already-accumulated statistics.
Matrix ridge_gradient_from_stats(const ModelTheta& theta, const SufficientStats& stats);

/// max |gradient| / (1 + |Y|_F); the first-order optimality certificate.
double ridge_certificate(const Matrix& gradient, const SufficientStats& stats);

struct PopulationStats {
  Matrix V;
  Matrix Y;
};

/// Expectations of V and Y for one episode under the feedback K, from the
/// second-moment ODE dSigma/dt = L Sigma + Sigma L^T + I, Sigma_0 = x0 x0^T,
/// L_t = A* + B* K_t (RK4 with `steps` steps, breakpoints of a piecewise gain
/// on the grid).
///
/// Continuous: V = int [I; K] Sigma [I; K]^T dt and Y = V theta*.
/// Discrete: V = sum_i tau [I; K_i] Sigma_{t_i} [I; K_i]^T and
/// Y = sum_i [I; K_i] Sigma_{t_i} (exp(L_i tau) - I)^T, which requires a
/// piecewise-constant gain on the uniform N-interval grid.
PopulationStats population_stats(const LqProblem& problem, const GainPath& K, Regime regime, int N,
                                 int steps);

/// CSV rows: kind,row,col,value for V and Y, then m.
void write_stats_csv(std::ostream& out, const SufficientStats& stats);

}  // namespace lqrl
