#pragma once

#include "lqrl/lq_model.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace lqrl {

/// Raised when an ODE integration produces non-finite values.
class NumericalBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric matrix path P on a grid; P at the last node is zero.
struct RiccatiPath {
  std::vector<double> grid;
  std::vector<Matrix> values;
};

/// Backward RK4 solve of dP/dt = -(A^T P + P A - P B R^{-1} B^T P + Q),
/// P_T = 0, on a uniform grid with `steps` steps (steps + 1 nodes).
/// Each step is symmetrized.
RiccatiPath solve_riccati_continuous(const ModelTheta& theta, const CostSpec& cost, double T,
                                     int steps);

/// K_t = -R^{-1} B^T P_t at every node of `path`.
GainPath gain_from_riccati(const ModelTheta& theta, const CostSpec& cost, const RiccatiPath& path);

/// One backward step of the discrete Riccati recursion with stepsize tau:
///
///   tau Q + F^T P F - F^T P tau B (R + tau B^T P B)^{-1} B^T P F,  F = I + tau A.
Matrix riccati_step_gamma(const Matrix& P, const ModelTheta& theta, const CostSpec& cost,
                          double tau);

struct DiscreteRiccatiSolution {
  RiccatiPath path;  // N + 1 nodes, P_N = 0
  GainPath gain;     // PiecewiseConstant, N intervals
};

/// P_i = Gamma(P_{i+1}) backward from P_N = 0, and on [t_i, t_{i+1}) the gain
/// K_i = -(R + tau B^T P_{i+1} B)^{-1} B^T P_{i+1} (I + tau A).
DiscreteRiccatiSolution solve_riccati_discrete(const ModelTheta& theta, const CostSpec& cost,
                                               double T, int N);

/// Expected cost E[ int_0^T X^T Q X + U^T R U dt ] of the linear feedback
/// U = K_t X under dX = (A* X + B* U) dt + dW, X_0 = x0.
///
/// Solves the backward Lyapunov ODE for S with RK4 and returns
/// x0^T S_0 x0 + int_0^T tr(S_t) dt (composite trapezoid). For a continuous
/// gain the grid has `steps` uniform steps. For a piecewise-constant gain each
/// constant piece is split into max(substeps, ceil(steps / pieces)) equal
/// sub-steps so that every breakpoint is a grid node.
double lyapunov_cost(const ModelTheta& theta_star, const CostSpec& cost, const GainPath& K,
                     const Vector& x0, double T, int steps, int substeps = 20);

/// x0^T P_0 x0 + int_0^T tr(P_t) dt with P from solve_riccati_continuous.
double optimal_cost(const LqProblem& problem, int steps);

/// Optimal continuous feedback for `theta` (Riccati solve + gain).
GainPath optimal_gain(const ModelTheta& theta, const CostSpec& cost, double T, int steps);

double spectral_norm(const Matrix& m);
double min_eigenvalue(const Matrix& symmetric);

/// CSV with columns t, then row-major matrix entries (m_<i>_<j>).
void write_path_csv(std::ostream& out, const std::vector<double>& grid,
                    const std::vector<Matrix>& values, const char* prefix);
void write_gain_csv(std::ostream& out, const GainPath& gain);

namespace detail {
/// Gamma with the sign of the correction term exposed; +1 is the real
/// operator. Used by the sanity suite to inject a fault.
Matrix riccati_step_gamma_signed(const Matrix& P, const ModelTheta& theta, const CostSpec& cost,
                                 double tau, double correction_sign);
}  // namespace detail

}  // namespace lqrl
