#include "lqrl/lq_model.hpp"
#include "lqrl/problem_io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace lqrl;

namespace {

const char* kPlanarText = R"(# planar rotation
n = 2
d = 2
T = 1
x0 = 1, 0
A_star = 0, 1, -1, 0
B_star = 1, 0, 0, 1
Q = 1, 0, 0, 1
R = 1, 0, 0, 1
)";

std::string without_line(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind(key + " =", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

TEST(Theta, StackingActsOnStateAndControl) {
  ModelTheta th{Matrix{{1, 2}, {3, 4}}, Matrix{{5}, {6}}};
  const Matrix S = stack_theta(th);
  ASSERT_EQ(S.rows(), 3);
  ASSERT_EQ(S.cols(), 2);
  Vector z(3);
  z << 0.5, -1.0, 2.0;
  const Vector expect = th.A * z.head(2) + th.B * z.tail(1);
  EXPECT_LT((S.transpose() * z - expect).norm(), 1e-15);

  const ModelTheta back = unstack_theta(S, 2);
  EXPECT_EQ(back.A, th.A);
  EXPECT_EQ(back.B, th.B);
}

TEST(Theta, DistanceIsFrobenius) {
  ModelTheta a{Matrix::Zero(1, 1), Matrix::Zero(1, 2)};
  ModelTheta b{Matrix::Constant(1, 1, 3.0), Matrix{{0.0, 4.0}}};
  EXPECT_DOUBLE_EQ(theta_distance(a, b), 5.0);
  ModelTheta c{Matrix::Zero(2, 2), Matrix::Zero(2, 1)};
  EXPECT_THROW(theta_distance(a, c), std::invalid_argument);
}

TEST(Validation, ReportsEveryViolation) {
  LqProblem p = builtin_problem("planar");
  EXPECT_TRUE(validate_problem(p).ok());
  p.T = 0.0;
  p.cost.Q(0, 0) = -1.0;
  const auto report = validate_problem(p);
  EXPECT_FALSE(report.ok());
  EXPECT_GE(report.violations.size(), 2u);
  EXPECT_THROW(require_valid(p), std::invalid_argument);
}

TEST(Validation, RankDeficientBIsFlaggedNotRejected) {
  LqProblem p = builtin_problem("scalar-canonical");
  p.d = 2;
  p.theta_star.B = Matrix{{1.0, 1.0}};
  p.cost.R = Matrix::Identity(2, 2);
  const auto report = validate_problem(p);
  EXPECT_TRUE(report.ok());
  EXPECT_FALSE(report.b_full_column_rank);
  EXPECT_FALSE(has_full_column_rank(p.theta_star.B));
}

TEST(Validation, AsymmetricCostRejected) {
  EXPECT_FALSE(is_symmetric_positive_definite(Matrix{{1.0, 0.5}, {0.0, 1.0}}));
  EXPECT_TRUE(is_symmetric_positive_definite(Matrix{{2.0, 0.5}, {0.5, 1.0}}));
  EXPECT_FALSE(is_finite(Matrix::Constant(1, 1, std::nan(""))));
}

TEST(GainPath, ContinuousInterpolatesLinearly) {
  GainPath K(GainKind::ContinuousGrid, {0.0, 0.5, 1.0},
             {Matrix::Constant(1, 1, 0.0), Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 4.0)});
  EXPECT_DOUBLE_EQ(K.at(0.25)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(K.at(1.0)(0, 0), 4.0);
  EXPECT_EQ(K.intervals(), 2);
}

TEST(GainPath, PiecewiseIsRightContinuous) {
  const auto grid = uniform_grid(1.0, 10);
  std::vector<Matrix> vals;
  for (int i = 0; i < 10; ++i) vals.push_back(Matrix::Constant(1, 1, i));
  GainPath K(GainKind::PiecewiseConstant, grid, vals);
  EXPECT_EQ(K.at(0.1)(0, 0), 1.0);
  EXPECT_EQ(K.at(0.0999)(0, 0), 0.0);
  EXPECT_EQ(K.at(1.0)(0, 0), 9.0);
  // 3 * 0.1 is 0.30000000000000004 in binary; it still lands in interval 3.
  EXPECT_EQ(K.interval_index(3 * 0.1), 3);
  EXPECT_EQ(K.interval_index(0.7 - 1e-12), 7);
}

TEST(GainPath, RejectsMismatchedInputs) {
  EXPECT_THROW(GainPath(GainKind::PiecewiseConstant, {0.0, 1.0}, {}), std::invalid_argument);
  EXPECT_THROW(GainPath(GainKind::ContinuousGrid, {0.0, 1.0}, {Matrix::Zero(1, 1)}),
               std::invalid_argument);
}

TEST(UniformGrid, EndsExactlyAtT) {
  const auto g = uniform_grid(0.7, 7);
  ASSERT_EQ(g.size(), 8u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 0.7);
}

TEST(ProblemIo, BuiltinsResolve) {
  const auto s = builtin_problem("scalar-canonical");
  EXPECT_EQ(s.n, 1);
  EXPECT_EQ(s.theta_star.A(0, 0), 0.0);
  EXPECT_EQ(s.theta_star.B(0, 0), 1.0);
  const auto p = builtin_problem("planar");
  EXPECT_EQ(p.theta_star.A, (Matrix{{0, 1}, {-1, 0}}));
  EXPECT_TRUE(is_builtin_problem("planar"));
  EXPECT_FALSE(is_builtin_problem("planar.cfg"));
  EXPECT_THROW(builtin_problem("cubic"), ConfigError);
}

TEST(ProblemIo, ParsesPlanarConfig) {
  std::istringstream in(kPlanarText);
  const auto p = parse_problem(in);
  const auto ref = builtin_problem("planar");
  EXPECT_EQ(p.theta_star.A, ref.theta_star.A);
  EXPECT_EQ(p.theta_star.B, ref.theta_star.B);
  EXPECT_EQ(p.x0, ref.x0);
  EXPECT_EQ(p.T, ref.T);
}

TEST(ProblemIo, EveryKeyIsRequired) {
  for (const char* key : {"n", "d", "T", "x0", "A_star", "B_star", "Q", "R"}) {
    std::istringstream in(without_line(kPlanarText, key));
    EXPECT_THROW(parse_problem(in), ConfigError) << key;
  }
}

TEST(ProblemIo, RejectsMalformedInput) {
  for (const std::string& bad : {
           std::string(kPlanarText) + "T = 2\n",                          // duplicate
           std::string(kPlanarText) + "gamma = 1\n",                      // unknown key
           without_line(kPlanarText, "Q") + "Q = 1, 0, 0\n",              // wrong count
           without_line(kPlanarText, "T") + "T = one\n",                  // not a number
           without_line(kPlanarText, "T") + "T = -1\n",                   // invalid horizon
           without_line(kPlanarText, "R") + "R = 1, 2, 2, 1\n",           // indefinite
       }) {
    std::istringstream in(bad);
    EXPECT_THROW(parse_problem(in), ConfigError);
  }
  EXPECT_THROW(load_problem("/nonexistent/problem.cfg"), ConfigError);
  EXPECT_THROW(resolve_problem("/nonexistent/problem.cfg"), ConfigError);
}

TEST(ProblemIo, WriteThenParseRoundTrips) {
  LqProblem p = builtin_problem("planar");
  p.theta_star.A(0, 1) = 0.1 + 0.2;
  p.x0(1) = 1.0 / 3.0;
  std::stringstream buf;
  write_problem(buf, p);
  const auto q = parse_problem(buf);
  EXPECT_EQ(q.theta_star.A, p.theta_star.A);
  EXPECT_EQ(q.x0, p.x0);
}
