#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qce/plant_sim.hpp"
#include "test_util.hpp"

namespace qce {
namespace {

using test::mat;
using test::vec;

const SystemPair kScalar{mat({{1.1}}), mat({{1.0}})};

TEST(Step, Examples) {
  EXPECT_DOUBLE_EQ(step(vec({0}), vec({0}), kScalar, vec({0}))(0), 0.0);
  EXPECT_DOUBLE_EQ(step(vec({1}), vec({-1.1}), kScalar, vec({0}))(0), 0.0);
  EXPECT_NEAR(step(vec({2}), vec({0}), kScalar, vec({0.5}))(0), 2.7, 1e-15);
  EXPECT_QCE_ERROR(step(vec({1, 2}), vec({0}), kScalar, vec({0})),
                   ErrorCode::kDimensionMismatch);
}

TEST(GaussianStream, EmptyAndDeterministic) {
  EXPECT_TRUE(gaussian_stream(7, 0, 1).empty());
  const auto a = gaussian_stream(7, 100, 3);
  const auto b = gaussian_stream(7, 100, 3);
  ASSERT_EQ(a.size(), 100u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NE(gaussian_stream(8, 1, 3)[0], a[0]);
}

TEST(GaussianStream, LawOfLargeNumbers) {
  const auto draws = gaussian_stream(7, 1000000, 1);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& v : draws) {
    sum += v(0);
    sq += v(0) * v(0);
  }
  const double n = static_cast<double>(draws.size());
  EXPECT_LE(std::abs(sum / n), 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(RngStreams, SubStreamsDifferAndReplay) {
  RngStreams a = RngStreams::from_master(42);
  RngStreams b = RngStreams::from_master(42);
  const double p = a.process.next();
  const double e = a.exploration.next();
  const double s = a.bootstrap.next();
  EXPECT_NE(p, e);
  EXPECT_NE(e, s);
  EXPECT_EQ(p, b.process.next());
  EXPECT_EQ(e, b.exploration.next());
  EXPECT_EQ(s, b.bootstrap.next());
  RngStreams c = RngStreams::from_master(43);
  EXPECT_NE(p, c.process.next());
}

TEST(RegretAccount, Arithmetic) {
  const std::vector<double> costs{3.0, 3.0};
  EXPECT_EQ(regret_account(costs, 1.0), (std::vector<double>{2.0, 4.0}));
  const std::vector<double> flat(10, 1.5);
  for (double r : regret_account(flat, 1.5)) EXPECT_DOUBLE_EQ(r, 0.0);
}

TEST(RegretAccount, ZeroTrajectoryRegretIsMinusTJstar) {
  // Noise-free loop under the optimal gain from x = 0 never leaves the origin.
  const MatrixXd K = mat({{-0.7}});
  const CostPair cost = CostPair::identity(1, 1);
  const double jstar = 1.7737707;
  CostAccumulator acc(jstar);
  VectorXd x = vec({0});
  for (int t = 0; t < 20; ++t) {
    const VectorXd u = K * x;
    acc.add(stage_cost(x, u, cost));
    x = step(x, u, kScalar, vec({0}));
  }
  for (std::size_t t = 0; t < acc.regret_curve().size(); ++t) {
    EXPECT_DOUBLE_EQ(acc.regret_curve()[t], -static_cast<double>(t + 1) * jstar);
  }
  EXPECT_DOUBLE_EQ(acc.cumulative_cost(), 0.0);
}

TEST(StageCost, Quadratic) {
  const CostPair cost{mat({{2, 0}, {0, 1}}), mat({{3}})};
  EXPECT_DOUBLE_EQ(stage_cost(vec({1, 2}), vec({1}), cost), 2 + 4 + 3);
}

TEST(SimConfig, Validation) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.sigma_w = 0.0;
  EXPECT_QCE_ERROR(c.validate(), ErrorCode::kInvalidArgument);
  c.sigma_w = 1.0;
  c.horizon = 2;
  EXPECT_QCE_ERROR(c.validate(), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace qce
