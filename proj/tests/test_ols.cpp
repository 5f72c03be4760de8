#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qce/ols.hpp"
#include "test_util.hpp"

namespace qce {
namespace {

using test::mat;
using test::vec;

OlsResult fit_noiseless(const SystemPair& sys, int n, std::uint64_t seed) {
  GaussianStream g(seed);
  std::vector<VectorXd> xs{VectorXd::Zero(sys.dx())};
  std::vector<VectorXd> us;
  for (int t = 0; t < n; ++t) {
    us.push_back(g.next_vector(sys.du()));
    xs.push_back(sys.A * xs.back() + sys.B * us.back());
  }
  return ols_fit(xs, us);
}

TEST(Ols, NoiselessScalarRecoversExactly) {
  const OlsResult r = fit_noiseless({mat({{1.1}}), mat({{1.0}})}, 50, 3);
  EXPECT_NEAR(r.Ahat(0, 0), 1.1, 1e-10);
  EXPECT_NEAR(r.Bhat(0, 0), 1.0, 1e-10);
  EXPECT_FALSE(r.singular);
  EXPECT_EQ(r.n_samples, 50);
}

TEST(Ols, NoiselessMultivariateRecovers) {
  const SystemPair sys{mat({{0.9, 0.2, 0}, {0, 0.7, 0.1}, {0.3, 0, 0.5}}),
                       mat({{1, 0}, {0.5, 1}, {0, 0.2}})};
  const OlsResult r = fit_noiseless(sys, 200, 9);
  EXPECT_LT((r.Ahat - sys.A).norm(), 1e-9);
  EXPECT_LT((r.Bhat - sys.B).norm(), 1e-9);
  EXPECT_EQ(r.theta_matrix().cols(), 5);
}

TEST(Ols, RankOneUsesMinimumNormSolution) {
  const std::vector<VectorXd> xs{vec({1}), vec({1.1})};
  const std::vector<VectorXd> us{vec({0})};
  const OlsResult r = ols_fit(xs, us);
  EXPECT_NEAR(r.Ahat(0, 0), 1.1, 1e-14);
  EXPECT_DOUBLE_EQ(r.Bhat(0, 0), 0.0);
  EXPECT_TRUE(r.singular);
}

TEST(Ols, AllZeroDataIsSingular) {
  const std::vector<VectorXd> xs(5, vec({0}));
  const std::vector<VectorXd> us(4, vec({0}));
  const OlsResult r = ols_fit(xs, us);
  EXPECT_DOUBLE_EQ(r.Ahat(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(r.Bhat(0, 0), 0.0);
  EXPECT_TRUE(r.Lambda.isZero());
  EXPECT_TRUE(r.singular);
}

TEST(Ols, Errors) {
  const std::vector<VectorXd> xs{vec({1})};
  const std::vector<VectorXd> none;
  EXPECT_QCE_ERROR(ols_fit(xs, none), ErrorCode::kEmptyWindow);
  const std::vector<VectorXd> us{vec({0}), vec({0})};
  EXPECT_QCE_ERROR(ols_fit(xs, us), ErrorCode::kDimensionMismatch);
}

TEST(Ols, NoisyEstimateConvergesAtRootNRate) {
  const SystemPair sys{mat({{1.1}}), mat({{1.0}})};
  const MatrixXd K = mat({{-0.6}});
  GaussianStream g(21);
  std::vector<VectorXd> xs{vec({0})};
  std::vector<VectorXd> us;
  for (int t = 0; t < 20000; ++t) {
    us.push_back(K * xs.back() + g.next_vector(1));
    xs.push_back(sys.A * xs.back() + sys.B * us.back() + g.next_vector(1));
  }
  const OlsResult r = ols_fit(xs, us);
  EXPECT_NEAR(r.Ahat(0, 0), 1.1, 0.05);
  EXPECT_NEAR(r.Bhat(0, 0), 1.0, 0.05);
}

TEST(Confidence, HandEvaluation) {
  OlsResult r;
  r.Lambda = MatrixXd::Identity(2, 2);
  r.singular = false;
  const ConfidenceScalar c = confidence(r, 2, 0.1, 2);
  const double want = 6.0 * (2.0 * std::log2(5.0) + std::log2(16.0 * 9.0 / 0.1));
  EXPECT_NEAR(c.value, want, 1e-12);
  EXPECT_NEAR(c.value, 90.81, 0.01);
  EXPECT_DOUBLE_EQ(c.lambda_min, 1.0);
}

TEST(Confidence, SingularIsInfinite) {
  OlsResult r;
  r.Lambda = mat({{1, 0}, {0, 0}});
  EXPECT_TRUE(std::isinf(confidence(r, 3, 0.1, 2).value));
}

TEST(Confidence, ShrinksWithMoreExcitation) {
  OlsResult r;
  r.singular = false;
  double prev = INFINITY;
  for (double s : {1.0, 10.0, 100.0, 1e4}) {
    r.Lambda = s * MatrixXd::Identity(2, 2);
    const double v = confidence(r, 5, 1e-4, 2).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Posterior, ZeroNoiseCollapsesToCenter) {
  OlsResult r = fit_noiseless({mat({{1.1}}), mat({{1.0}})}, 50, 3);
  for (const auto& s : sample_ols_posterior(r, 0.0, 10, 5)) {
    EXPECT_EQ(s.A, r.Ahat);
    EXPECT_EQ(s.B, r.Bhat);
  }
}

TEST(Posterior, TightLambdaStaysNearCenter) {
  OlsResult r;
  r.Ahat = mat({{1.1}});
  r.Bhat = mat({{1.0}});
  r.Lambda = 1e6 * MatrixXd::Identity(2, 2);
  r.singular = false;
  double worst = 0.0;
  for (const auto& s : sample_ols_posterior(r, 1.0, 50, 8)) {
    worst = std::max({worst, std::abs(s.A(0, 0) - 1.1), std::abs(s.B(0, 0) - 1.0)});
  }
  EXPECT_LT(worst, 0.05);
}

TEST(Posterior, SampleCovarianceMatchesInverseLambda) {
  OlsResult r;
  r.Ahat = mat({{0.0}});
  r.Bhat = mat({{0.0}});
  r.Lambda = mat({{4, 1}, {1, 2}});
  r.singular = false;
  const auto samples = sample_ols_posterior(r, 1.0, 40000, 10);
  MatrixXd cov = MatrixXd::Zero(2, 2);
  for (const auto& s : samples) {
    const VectorXd v = vec({s.A(0, 0), s.B(0, 0)});
    cov += v * v.transpose();
  }
  cov /= static_cast<double>(samples.size());
  EXPECT_LT((cov - r.Lambda.inverse()).norm(), 0.02);
}

TEST(Posterior, SingularThrows) {
  OlsResult r;
  r.Ahat = mat({{0.0}});
  r.Bhat = mat({{0.0}});
  r.Lambda = MatrixXd::Zero(2, 2);
  r.singular = true;
  EXPECT_QCE_ERROR(sample_ols_posterior(r, 1.0, 3, 1), ErrorCode::kSingularCovariance);
}

}  // namespace
}  // namespace qce
