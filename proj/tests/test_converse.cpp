#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qce/converse.hpp"
#include "test_util.hpp"

namespace qce {
namespace {

using test::mat;
using test::vec;

const MatrixXd I1 = MatrixXd::Identity(1, 1);

TEST(HardInstance, ScalarHandValues) {
  const HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 2.0);
  EXPECT_NEAR(h.Phi_K(0, 0), std::sqrt(0.91 / 2.0), 1e-14);
  EXPECT_NEAR(h.Phi_K(0, 0), 0.67454, 1e-5);
  const double phi = std::sqrt(0.455);
  EXPECT_NEAR(h.B_K(0, 0), -0.3 / (2.0 * phi), 1e-14);
  EXPECT_NEAR(h.A_K(0, 0), phi + 0.09 / (2.0 * phi), 1e-14);
  EXPECT_NEAR(h.B_K(0, 0), -0.22239, 5e-5);
  EXPECT_NEAR(h.A_K(0, 0), 0.74126, 5e-5);
  EXPECT_DOUBLE_EQ(h.P(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(h.J_P, 2.0);
}

TEST(HardInstance, ZeroGainCollapses) {
  const HardInstance h = build_hard_instance(mat({{0.0}}), I1, I1, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(h.M_K(0, 0), 1.0);
  EXPECT_NEAR(h.Phi_K(0, 0), std::sqrt(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(h.B_K(0, 0), 0.0);
  EXPECT_NEAR(h.A_K(0, 0), std::sqrt(0.5), 1e-15);
  const RiccatiSolution sol = solve_dare(h.system(), h.cost());
  EXPECT_NEAR(sol.K(0, 0), 0.0, 1e-12);
}

TEST(HardInstance, FixedPointAgreesWithDareSolver) {
  const HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 2.0);
  const FixedPointCheck fp = verify_fixed_point(h, h.cost());
  EXPECT_LE(fp.gain_gap, 1e-8);
  EXPECT_LE(fp.cost_rel_error, 1e-10);
}

TEST(HardInstance, RandomCubeSweep) {
  std::mt19937_64 gen(8);
  const double r = 0.5;
  const double a = r / std::sqrt(2.0);
  std::uniform_real_distribution<double> U(-a, a);
  const CostPair cost = CostPair::identity(1, 2);
  // du = 2, dx = 1.
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const MatrixXd K = mat({{U(gen)}, {U(gen)}});
    const HardInstance h = build_hard_instance(K, cost.Rx, cost.Ru, 1.0, default_c(r, cost));
    worst = std::max(worst, verify_fixed_point(h, cost).gain_gap);
    const InstanceInvariants inv = check_invariants(h);
    EXPECT_LT(inv.worst(), 1e-12);
    EXPECT_LT(inv.phi_radius, 1.0);
  }
  EXPECT_LE(worst, 1e-7);
}

TEST(HardInstance, ChoiceOfCViolated) {
  EXPECT_QCE_ERROR(build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 1.05),
                   ErrorCode::kCChoiceViolated);
  EXPECT_QCE_ERROR(build_hard_instance(mat({{0.3, 0.1}}), I1, I1, 1.0, 2.0),
                   ErrorCode::kDimensionMismatch);
}

TEST(Bellman, Examples) {
  const HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 2.0);
  EXPECT_NEAR(bellman_residual(h, vec({0}), vec({0})), 0.0, 1e-15);
  for (double x : {-3.0, 0.5, 10.0}) {
    EXPECT_NEAR(bellman_residual(h, vec({x}), h.K * vec({x})), 0.0, 1e-12);
  }
  std::mt19937_64 gen(3);
  std::normal_distribution<double> N;
  for (int i = 0; i < 1000; ++i) {
    ASSERT_LE(std::abs(bellman_residual(h, vec({N(gen)}), vec({N(gen)}))), 1e-9);
  }
}

TEST(Bellman, MultivariateInstance) {
  const CostPair cost{mat({{2, 0.5}, {0.5, 1}}), mat({{1.5}})};
  const HardInstance h = build_hard_instance(mat({{0.2, -0.1}}), cost.Rx, cost.Ru, 0.7, 3.0);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> N;
  for (int i = 0; i < 1000; ++i) {
    const VectorXd x = vec({N(gen), N(gen)});
    const VectorXd u = vec({N(gen)});
    ASSERT_LE(std::abs(bellman_residual(h, x, u)), 1e-9 * (1 + x.squaredNorm() + u.squaredNorm()));
  }
  EXPECT_LE(verify_fixed_point(h, cost).gain_gap, 1e-7);
}

TEST(RegretIdentity, OptimalPolicyHasNoExcess) {
  const HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 2.0);
  const MatrixXd K = h.K;
  const RegretIdentityReport rep =
      regret_identity_check(h, [K](const VectorXd& x) -> VectorXd { return K * x; }, 300, 400, 2);
  EXPECT_NEAR(rep.excess_mean, 0.0, 1e-12);
  EXPECT_TRUE(rep.agree);
}

TEST(RegretIdentity, PerturbedPolicyAgreesWithinThreeSe) {
  const HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 1.0, 2.0);
  const RegretIdentityReport rep = regret_identity_check(
      h, [](const VectorXd& x) -> VectorXd { return 0.4 * x; }, 500, 2000, 11);
  EXPECT_GT(rep.excess_mean, 0.0);
  EXPECT_TRUE(rep.agree) << "z=" << rep.z_score;
}

TEST(RegretIdentity, NoiseFreeIsExact) {
  HardInstance h = build_hard_instance(mat({{0.3}}), I1, I1, 0.0, 2.0);
  const RegretIdentityReport rep = regret_identity_check(
      h, [](const VectorXd& x) -> VectorXd { return 0.7 * x + vec({0.1}); }, 200, 3, 1);
  EXPECT_LT(rep.max_pathwise_gap, 1e-9);
  EXPECT_GT(rep.excess_mean, 0.0);
  EXPECT_TRUE(rep.agree);
}

TEST(BitsLowerBound, CoefficientForRootTRegret) {
  for (int dx : {1, 2, 3}) {
    for (int du : {1, 2}) {
      const CostPair cost = CostPair::identity(dx, du);
      const BoundsReport b =
          bits_lower_bound(0.5, 1 << 20, dx, du, 0.5, cost, 1.0, 1.0, default_c(0.5, cost));
      EXPECT_EQ(b.coefficient, du * dx / 4.0);
    }
  }
}

TEST(BitsLowerBound, ClosedFormReevaluated) {
  const CostPair cost = CostPair::identity(1, 1);
  const std::int64_t T = 1 << 20;
  const BoundsReport b = bits_lower_bound(0.5, T, 1, 1, 0.5, cost, 1.0, 1.0, 1.3);
  const double c = 1.3;
  const double c0 = 1.0;
  const double J = c;
  const double Cest = 5.0 * c / c0 * (1.0 + c * J);
  const double C = 1.0 + 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * Cest) -
                   std::log2(2.0 * 0.5);
  EXPECT_NEAR(b.C_est, Cest, 1e-12);
  EXPECT_NEAR(b.constant_C, C, 1e-12);
  EXPECT_NEAR(b.bits_lower, 0.25 * 20.0 - C, 1e-12);
  EXPECT_QCE_ERROR(bits_lower_bound(0.4, T, 1, 1, 0.5, cost, 1.0, 1.0, 1.3),
                   ErrorCode::kInvalidArgument);
  EXPECT_QCE_ERROR(bits_lower_bound(0.5, T, 1, 1, 0.5, cost, 1.0, 1.0, 1.1),
                   ErrorCode::kCChoiceViolated);
}

TEST(InflationFactors, HalfRho) {
  const InflationFactors f = inflation_factors(0.5, 1.0);
  EXPECT_NEAR(f.beta, 0.70711, 1e-5);
  EXPECT_NEAR(f.C_rho, 3.41421, 1e-5);
  EXPECT_NEAR(f.m_inf, 4.41421, 1e-5);
  EXPECT_EQ(f.M_rho, 5);
  EXPECT_EQ(f.b_rho, 5);
}

TEST(InflationFactors, VanishAsRhoShrinks) {
  for (double c0 : {0.1, 1.0, 100.0}) {
    const InflationFactors f = inflation_factors(1e-6, c0);
    EXPECT_LT(f.Q_slow, 1e-10 * c0);
    EXPECT_LT(f.Q_fast, 1e-10 * c0);
    EXPECT_NEAR(f.C_rho, 1.0, 1e-5);
  }
  EXPECT_QCE_ERROR(inflation_factors(0.75, 1.0), ErrorCode::kRhoOutOfRange);
}

TEST(CommBudget, LeadingTerm) {
  const CommBudget b = comm_budget_bound(2, 0.5, 1 << 10);
  EXPECT_NEAR(b.horizon_bits, (2 * std::log2(5.0) + 5) * 10, 1e-12);
  EXPECT_NEAR(b.horizon_bits, 96.4, 0.05);
  EXPECT_FALSE(b.symbolic_overhead.empty());
}

}  // namespace
}  // namespace qce
