#include "lqrl/estimation.hpp"
#include "lqrl/experiments.hpp"
#include "lqrl/problem_io.hpp"
#include "lqrl/rng.hpp"
#include "lqrl/sde_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace lqrl;

namespace {

LqProblem driftless() {
  LqProblem p = builtin_problem("scalar-canonical");
  p.theta_star.A.setZero();
  return p;
}

}  // namespace

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  using C = Philox4x32::Counter;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Substream, DeterministicAndKeyed) {
  SubstreamRng a(42, 1, 7), b(42, 1, 7), c(42, 2, 7), d(43, 1, 7);
  for (int i = 0; i < 10; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    EXPECT_NE(x, c.normal());
    EXPECT_NE(x, d.normal());
  }
}

TEST(Substream, NormalMoments) {
  SubstreamRng rng(1, 0, 0);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 0.1);
  SubstreamRng u(1, 0, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(SimConfig, StepMustDivideHorizon) {
  EXPECT_EQ(fine_step_count({1e-3, 0}, 1.0), 1000);
  EXPECT_EQ(fine_step_count({0.1, 0}, 0.7), 7);
  EXPECT_THROW(fine_step_count({0.3, 0}, 1.0), std::invalid_argument);
  EXPECT_THROW(fine_step_count({0.0, 0}, 1.0), std::invalid_argument);
  EXPECT_THROW(fine_step_count({-1e-3, 0}, 1.0), std::invalid_argument);
}

TEST(Simulate, EulerMaruyamaRecursion) {
  const auto p = builtin_problem("planar");
  const auto K = optimal_gain(p.theta_star, p.cost, p.T, 1000);
  const SimConfig cfg{1e-2, 9};
  const auto tr = simulate_episode(p, K, cfg, 3, 4);
  ASSERT_EQ(tr.times.size(), 101u);
  ASSERT_EQ(tr.increments.cols(), 100);
  EXPECT_EQ(tr.states.col(0), p.x0);
  for (int k = 0; k < 100; ++k) {
    const Matrix Kk = K.at(tr.times[k]);
    EXPECT_LT((tr.controls.col(k) - Kk * tr.states.col(k)).norm(), 1e-13);
    const Vector next = tr.states.col(k) +
                        (p.theta_star.A * tr.states.col(k) + p.theta_star.B * tr.controls.col(k)) * 1e-2 +
                        tr.increments.col(k);
    EXPECT_LT((tr.states.col(k + 1) - next).norm(), 1e-13);
  }
  const auto again = simulate_episode(p, K, cfg, 3, 4);
  EXPECT_EQ(again.states, tr.states);
  EXPECT_EQ(again.increments, tr.increments);
}

TEST(Simulate, IncrementsHaveStepVariance) {
  const auto p = driftless();
  const auto tr = simulate_episode(p, GainPath::zero(1, 1, 1.0), {1e-4, 2}, 0, 0);
  const double var = tr.increments.squaredNorm() / tr.increments.size();
  EXPECT_NEAR(var, 1e-4, 1e-4 * 4 * std::sqrt(2.0 / tr.increments.size()));
}

TEST(Batch, PrefixStableAndPhaseKeyed) {
  const auto p = builtin_problem("scalar-canonical");
  const auto K = GainPath::zero(1, 1, 1.0);
  const SimConfig cfg{1e-2, 5};
  const auto three = batch_simulate(p, K, cfg, 0, 3);
  const auto five = batch_simulate(p, K, cfg, 0, 5);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(three[j].states, five[j].states);
  const auto other = batch_simulate(p, K, cfg, 1, 1);
  EXPECT_NE(other[0].states, five[0].states);
}

TEST(Batch, WorkerCountDoesNotChangeResults) {
  const auto p = builtin_problem("planar");
  const auto K = optimal_gain(p.theta_star, p.cost, p.T, 100);
  const SimConfig cfg{1e-2, 17};
  setenv("LQRL_WORKERS", "1", 1);
  const auto one = batch_summarize(p, K, cfg, 2, 40, 10);
  setenv("LQRL_WORKERS", "3", 1);
  const auto three = batch_summarize(p, K, cfg, 2, 40, 10);
  unsetenv("LQRL_WORKERS");
  for (int j = 0; j < 40; ++j) {
    EXPECT_EQ(one[j].V_continuous, three[j].V_continuous);
    EXPECT_EQ(one[j].Y_discrete, three[j].Y_discrete);
    EXPECT_EQ(one[j].realized_cost, three[j].realized_cost);
  }
}

TEST(Summaries, MatchTrajectoryStatistics) {
  const auto p = builtin_problem("planar");
  const int N = 10;
  const auto K = solve_riccati_discrete(p.theta_star, p.cost, p.T, N).gain;
  const SimConfig cfg{1e-2, 23};
  const auto trajs = batch_simulate(p, K, cfg, 1, 30);
  const auto sums = batch_summarize(p, K, cfg, 1, 30, N);
  const auto cont = accumulate_stats_continuous(trajs);
  const auto disc = accumulate_stats_discrete(trajs, N);
  const auto cont2 = stats_from_summaries(sums, Regime::Continuous);
  const auto disc2 = stats_from_summaries(sums, Regime::Discrete);
  EXPECT_LT((cont.V - cont2.V).norm(), 1e-12);
  EXPECT_LT((cont.Y - cont2.Y).norm(), 1e-12);
  EXPECT_LT((disc.V - disc2.V).norm(), 1e-12);
  EXPECT_LT((disc.Y - disc2.Y).norm(), 1e-12);
  EXPECT_EQ(cont2.m, 30);
  for (int j = 0; j < 30; ++j) EXPECT_NEAR(sums[j].realized_cost, realized_cost(trajs[j], p.cost), 1e-12);
}

TEST(Summaries, RejectCoarseGridOffFineGrid) {
  const auto p = builtin_problem("scalar-canonical");
  const EpisodeSimulator sim(p, GainPath::zero(1, 1, 1.0), {1e-2, 0});
  EXPECT_THROW(sim.summarize(0, 0, 7), std::invalid_argument);
}

TEST(RealizedCost, HarnessTrajectories) {
  EpisodeTrajectory tr;
  tr.times = uniform_grid(1.0, 4);
  tr.states = Matrix::Zero(2, 5);
  tr.controls = Matrix::Zero(2, 5);
  tr.increments = Matrix::Zero(2, 4);
  const auto cost = builtin_problem("planar").cost;
  EXPECT_EQ(realized_cost(tr, cost), 0.0);
  tr.states.row(0).setConstant(2.0);
  tr.states.row(1).setConstant(-1.0);
  EXPECT_NEAR(realized_cost(tr, cost), 5.0, 1e-15);
}

TEST(Driftless, MonteCarloMoments) {
  for (const auto& c : driftless_checks(0, 10000)) EXPECT_TRUE(c.pass) << c.name << ": " << c.detail;
}

TEST(Driftless, WeakErrorBelowNoise) {
  const auto p = builtin_problem("scalar-canonical");
  const auto K = optimal_gain(p.theta_star, p.cost, p.T, 1000);
  auto mean_cost = [&](double h) {
    const auto s = batch_summarize(p, K, {h, 31}, 0, 10000, 0);
    double m = 0, m2 = 0;
    for (const auto& e : s) {
      m += e.realized_cost;
      m2 += e.realized_cost * e.realized_cost;
    }
    m /= s.size();
    return std::pair{m, std::sqrt((m2 / s.size() - m * m) / s.size())};
  };
  const auto [a, se_a] = mean_cost(2e-3);
  const auto [b, se_b] = mean_cost(1e-3);
  EXPECT_LT(std::abs(a - b), 4.0 * std::hypot(se_a, se_b));
}

TEST(SimulatorCsv, TrajectoryHeader) {
  const auto p = builtin_problem("planar");
  const auto tr = simulate_episode(p, GainPath::zero(2, 2, 1.0), {0.5, 0}, 0, 0);
  std::ostringstream out;
  write_trajectory_csv(out, tr);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x_0,x_1,u_0,u_1");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 3);
}
