#include "lqrl/experiments.hpp"
#include "lqrl/problem_io.hpp"
#include "lqrl/riccati.hpp"
#include "lqrl/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace lqrl;

namespace {

// Solution of dp/ds = 2 a p - p^2 + 1, p(0) = 0, in time-to-go s
// (b = q = r = 1).
double scalar_riccati(double a, double s) {
  const double w = std::sqrt(a * a + 1.0);
  return std::sinh(w * s) / (w * std::cosh(w * s) - a * std::sinh(w * s));
}

LqProblem diagonal_problem(double a1, double a2) {
  LqProblem p;
  p.n = p.d = 2;
  p.T = 1.0;
  p.x0 = Vector{{1.0, 0.5}};
  p.theta_star.A = Matrix{{a1, 0.0}, {0.0, a2}};
  p.theta_star.B = Matrix::Identity(2, 2);
  p.cost.Q = Matrix::Identity(2, 2);
  p.cost.R = Matrix::Identity(2, 2);
  return p;
}

LqProblem scalar_with(double a, double x0) {
  LqProblem p = builtin_problem("scalar-canonical");
  p.theta_star.A(0, 0) = a;
  p.x0(0) = x0;
  return p;
}

}  // namespace

TEST(Riccati, ScalarMatchesTanh) {
  const auto p = builtin_problem("scalar-canonical");
  const auto path = solve_riccati_continuous(p.theta_star, p.cost, p.T, 1000);
  ASSERT_EQ(path.grid.size(), 1001u);
  EXPECT_NEAR(path.values.front()(0, 0), 0.761594, 1e-6);
  double worst = 0.0;
  for (std::size_t k = 0; k < path.grid.size(); ++k) {
    worst = std::max(worst, std::abs(path.values[k](0, 0) - std::tanh(1.0 - path.grid[k])));
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_EQ(path.values.back()(0, 0), 0.0);
}

TEST(Riccati, DiagonalInstanceDecouples) {
  const auto p = diagonal_problem(0.7, -1.3);
  const auto path = solve_riccati_continuous(p.theta_star, p.cost, p.T, 2000);
  for (std::size_t k = 0; k < path.grid.size(); k += 100) {
    const double s = p.T - path.grid[k];
    EXPECT_NEAR(path.values[k](0, 0), scalar_riccati(0.7, s), 1e-10);
    EXPECT_NEAR(path.values[k](1, 1), scalar_riccati(-1.3, s), 1e-10);
    EXPECT_NEAR(path.values[k](0, 1), 0.0, 1e-14);
  }
  const double joint = optimal_cost(p, 2000);
  const double split = optimal_cost(scalar_with(0.7, 1.0), 2000) + optimal_cost(scalar_with(-1.3, 0.5), 2000);
  EXPECT_NEAR(joint, split, 1e-12);
}

TEST(Riccati, ScalarOptimalCostClosedForm) {
  const auto p = builtin_problem("scalar-canonical");
  // x0^2 tanh(T) + int_0^T tanh(T - t) dt = tanh 1 + ln cosh 1.
  // The time integral is a trapezoid sum, hence the looser tolerance.
  EXPECT_NEAR(optimal_cost(p, 1000), std::tanh(1.0) + std::log(std::cosh(1.0)), 1e-7);
  EXPECT_NEAR(optimal_cost(p, 1000), 1.195379, 1e-5);
}

TEST(Riccati, ShortHorizonCostVanishes) {
  auto p = builtin_problem("planar");
  p.x0.setZero();
  p.T = 0.01;
  const double J = optimal_cost(p, 100);
  EXPECT_GT(J, 0.0);
  EXPECT_LE(J, p.T * p.T * spectral_norm(p.cost.Q) * p.n);
}

TEST(Riccati, PathsStayPositiveSemidefinite) {
  for (std::uint32_t k = 0; k < 20; ++k) {
    SubstreamRng rng(7, kAuxiliaryPhase, k);
    const int n = 1 + k % 3, d = 1 + (k / 3) % 3;
    ModelTheta th{Matrix(n, n), Matrix(n, d)};
    for (auto* m : {&th.A, &th.B})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    CostSpec cost{Matrix::Identity(n, n), 0.5 * Matrix::Identity(d, d)};
    const auto path = solve_riccati_continuous(th, cost, 1.5, 500);
    for (const auto& P : path.values) {
      EXPECT_GE(min_eigenvalue(P), -1e-10);
      EXPECT_EQ(P, P.transpose());
    }
  }
}

TEST(Riccati, RejectsTooFewSteps) {
  const auto p = builtin_problem("planar");
  EXPECT_THROW(solve_riccati_continuous(p.theta_star, p.cost, p.T, 1), std::invalid_argument);
}

TEST(Gamma, ScalarHandComputed) {
  const auto p = builtin_problem("scalar-canonical");
  const Matrix P = Matrix::Constant(1, 1, 1.0);
  // 0.1 + 1 - 0.1 * 1 / (1 + 0.1)
  EXPECT_NEAR(riccati_step_gamma(P, p.theta_star, p.cost, 0.1)(0, 0), 1.1 - 0.1 / 1.1, 1e-15);
}

TEST(Gamma, BoundsHoldAndFaultIsCaught) {
  EXPECT_TRUE(gamma_bound_check(3, 200, false).pass);
  EXPECT_TRUE(gamma_bound_check(11, 200, false).pass);
  EXPECT_FALSE(gamma_bound_check(3, 200, true).pass);
}

TEST(DiscreteRiccati, SingleIntervalIsHandComputable) {
  const auto p = builtin_problem("scalar-canonical");
  const auto sol = solve_riccati_discrete(p.theta_star, p.cost, p.T, 1);
  ASSERT_EQ(sol.path.values.size(), 2u);
  EXPECT_EQ(sol.path.values[1](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(sol.path.values[0](0, 0), 1.0);  // tau Q with P_1 = 0
  EXPECT_EQ(sol.gain.values()[0](0, 0), 0.0);
  EXPECT_EQ(sol.gain.kind(), GainKind::PiecewiseConstant);
}

TEST(DiscreteRiccati, GainUsesNextNode) {
  const auto p = builtin_problem("planar");
  const int N = 8;
  const double tau = p.T / N;
  const auto sol = solve_riccati_discrete(p.theta_star, p.cost, p.T, N);
  for (int i = 0; i < N; ++i) {
    const Matrix& Pn = sol.path.values[i + 1];
    const Matrix& B = p.theta_star.B;
    const Matrix F = Matrix::Identity(2, 2) + tau * p.theta_star.A;
    const Matrix K = -(p.cost.R + tau * B.transpose() * Pn * B).inverse() * B.transpose() * Pn * F;
    EXPECT_LT((sol.gain.values()[i] - K).norm(), 1e-13);
    EXPECT_LT((sol.path.values[i] - riccati_step_gamma(Pn, p.theta_star, p.cost, tau)).norm(), 1e-15);
  }
}

TEST(DiscreteRiccati, FirstOrderConvergence) {
  for (const char* name : {"scalar-canonical", "planar"}) {
    const auto rows = riccati_convergence_study(builtin_problem(name), {25, 50, 100, 200, 400});
    for (double r : error_ratios(rows)) {
      EXPECT_GE(r, 1.6) << name;
      EXPECT_LE(r, 2.4) << name;
    }
  }
}

TEST(DiscreteRiccati, MatchedGridErrorIsSmall) {
  const auto rows = riccati_convergence_study(builtin_problem("planar"), {10000}, 10000);
  EXPECT_LT(rows.front().sup_error_P, 1e-3);
  EXPECT_LT(rows.front().sup_error_K, 1e-3);
}

TEST(Lyapunov, DriftlessZeroGain) {
  auto p = builtin_problem("scalar-canonical");
  p.theta_star.A.setZero();
  // E X_t^2 = 1 + t.
  EXPECT_NEAR(lyapunov_cost(p.theta_star, p.cost, GainPath::zero(1, 1, 1.0), p.x0, 1.0, 1000), 1.5, 1e-12);
}

TEST(Lyapunov, ConstantGainClosedForm) {
  auto p = builtin_problem("scalar-canonical");
  p.theta_star.A.setZero();
  const double k = 1.5;
  const Matrix K = Matrix::Constant(1, 1, -k);
  const GainPath cont(GainKind::ContinuousGrid, {0.0, 1.0}, {K, K});
  const GainPath piece(GainKind::PiecewiseConstant, uniform_grid(1.0, 4), {K, K, K, K});
  const double e = std::exp(-2.0 * k);
  const double exact = (1.0 + k * k) * ((1.0 - e) / (2.0 * k) + 1.0 / (2.0 * k) - (1.0 - e) / (4.0 * k * k));
  EXPECT_NEAR(lyapunov_cost(p.theta_star, p.cost, cont, p.x0, 1.0, 4000), exact, 1e-7);
  EXPECT_NEAR(lyapunov_cost(p.theta_star, p.cost, piece, p.x0, 1.0, 4000), exact, 1e-7);
}

TEST(Lyapunov, AgreesWithOptimalCost) {
  EXPECT_TRUE(oracle_agreement_check(5, 50).pass);
  for (const char* name : {"scalar-canonical", "planar"}) {
    const auto p = builtin_problem(name);
    const auto K = optimal_gain(p.theta_star, p.cost, p.T, 1000);
    const double J = optimal_cost(p, 1000);
    EXPECT_LE(std::abs(lyapunov_cost(p.theta_star, p.cost, K, p.x0, p.T, 1000) - J), 1e-8 * (1 + J));
  }
}

TEST(Lyapunov, SuboptimalGainsCostMore) {
  const auto p = builtin_problem("planar");
  const double J = optimal_cost(p, 1000);
  const ModelTheta dir = random_direction(p, 1);
  for (double eps : {0.3, 0.1, 0.01}) {
    const auto gap = epsilon_gap_sweep(p, dir, {eps}, 1000).front().gap;
    EXPECT_GT(gap, 0.0);
  }
  for (int N : {5, 20}) {
    const auto K = solve_riccati_discrete(p.theta_star, p.cost, p.T, N).gain;
    EXPECT_GT(lyapunov_cost(p.theta_star, p.cost, K, p.x0, p.T, 1000), J);
  }
}

TEST(Gap, QuadraticInParameterError) {
  const auto p = builtin_problem("planar");
  const auto pts = epsilon_gap_sweep(p, random_direction(p, 0), {0.0, 0.2, 0.1, 0.05, 0.025});
  EXPECT_LE(std::abs(pts.front().gap), 1e-8);
  std::vector<double> x, y;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    x.push_back(pts[i].x);
    y.push_back(pts[i].gap);
  }
  const double slope = std::log(y.back() / y.front()) / std::log(x.back() / x.front());
  EXPECT_NEAR(slope, 2.0, 0.2);
}

TEST(Gap, QuadraticInStepsize) {
  const auto pts = stepsize_gap_sweep(builtin_problem("planar"), {25, 50, 100, 200});
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    EXPECT_NEAR(pts[i].gap / pts[i + 1].gap, 4.0, 0.6);
  }
}

TEST(RiccatiCsv, PathAndGainHeaders) {
  const auto p = builtin_problem("planar");
  const auto path = solve_riccati_continuous(p.theta_star, p.cost, p.T, 4);
  std::ostringstream out;
  write_path_csv(out, path.grid, path.values, "P");
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,P_0_0,P_0_1,P_1_0,P_1_1");
  std::ostringstream g;
  write_gain_csv(g, gain_from_riccati(p.theta_star, p.cost, path));
  EXPECT_EQ(g.str().substr(0, g.str().find('\n')), "t,K_0_0,K_0_1,K_1_0,K_1_1");
}
