#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>

#include "qce/protocol.hpp"
#include "test_util.hpp"

namespace qce {
namespace {

using test::mat;
using test::vec;

const SystemPair kScalar{mat({{1.1}}), mat({{1.0}})};
const CostPair kCost1 = CostPair::identity(1, 1);

OlsResult ols_at(const SystemPair& sys, double lambda_scale) {
  OlsResult r;
  r.Ahat = sys.A;
  r.Bhat = sys.B;
  r.Lambda = lambda_scale * MatrixXd::Identity(sys.dx() + sys.du(), sys.dx() + sys.du());
  r.n_samples = 100;
  r.singular = false;
  return r;
}

TEST(Theta, RowMajorLayout) {
  const MatrixXd A = mat({{1, 2}, {3, 4}});
  const MatrixXd B = mat({{5}, {6}});
  EXPECT_EQ(pack_theta(A, B), vec({1, 2, 5, 3, 4, 6}));
  const SystemPair s = unpack_theta(pack_theta(A, B), 2, 1);
  EXPECT_EQ(s.A, A);
  EXPECT_EQ(s.B, B);
  EXPECT_QCE_ERROR(unpack_theta(vec({1, 2}), 2, 1), ErrorCode::kDimensionMismatch);
}

TEST(TheoreticalTrigger, CovarianceGate) {
  OlsResult r = ols_at(kScalar, 0.5);
  ConfidenceScalar c;
  c.value = 1e-30;
  EXPECT_FALSE(theoretical_trigger(r, c, kCost1));
}

TEST(TheoreticalTrigger, Threshold) {
  const OlsResult r = ols_at(kScalar, 10.0);
  const double csafe = safe_constant(kScalar, kCost1);
  EXPECT_NEAR(csafe, 947.8, 0.5);
  EXPECT_NEAR(1.0 / (9.0 * csafe), 1.17e-4, 0.01e-4);
  ConfidenceScalar c;
  c.value = 1e-10;  // sqrt = 1e-5
  EXPECT_TRUE(theoretical_trigger(r, c, kCost1));
  c.value = 1e-6;  // sqrt = 1e-3
  EXPECT_FALSE(theoretical_trigger(r, c, kCost1));
  c.value = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(theoretical_trigger(r, c, kCost1));
}

TEST(BootstrapTrigger, TightPosteriorFires) {
  GaussianStream rng(1);
  EXPECT_TRUE(bootstrap_trigger(ols_at(kScalar, 1e8), 1.0, TriggerConfig{}, kCost1, rng));
}

TEST(BootstrapTrigger, HugeUncertaintyRarelyFires) {
  int fired = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GaussianStream rng(seed);
    fired += bootstrap_trigger(ols_at(kScalar, 1.0), 1.0, TriggerConfig{}, kCost1, rng);
  }
  EXPECT_LE(fired, 2);
}

TEST(BootstrapTrigger, NoSamplesIsVacuouslyTrue) {
  TriggerConfig cfg;
  cfg.n_mc = 0;
  GaussianStream rng(1);
  EXPECT_TRUE(bootstrap_trigger(ols_at(kScalar, 1.0), 1.0, cfg, kCost1, rng));
}

TEST(SafeRoundInit, ScheduleConstantsMatchIndependentEvaluation) {
  const VectorXd theta = pack_theta(kScalar.A, kScalar.B);
  const double r_safe = safe_radius(theta, 1, 1, kCost1);
  const SafeRoundInit s =
      safe_round_init({theta, EstimateTag::kSharedDecoded}, 1, 1, r_safe, 0.5, 1e-4, kCost1, 1.0);
  const double p = (1.21 + std::sqrt(1.21 * 1.21 + 4.0)) / 2.0;
  const double pop = 1.0835 * p;
  EXPECT_NEAR(pop, 1.9219, 1e-4);
  const double sigma_in_sq =
      std::pow(pop, 4.5) * std::max(1.0, 1.0 + r_safe) * std::sqrt(std::log2(pop / 1e-4));
  EXPECT_NEAR(s.sched.sigma_in_sq, sigma_in_sq, 1e-9 * sigma_in_sq);
  const double L = std::log2(1e4);
  const double vslow = pop * std::sqrt(L / sigma_in_sq);
  const double vfast = std::pow(pop, 1.5) * L;
  EXPECT_NEAR(s.sched.vslow_hat, vslow, 1e-12 * vslow);
  EXPECT_NEAR(s.sched.vfast_hat, vfast, 1e-12 * vfast);
  const double q = std::pow(2.0, 0.25);
  EXPECT_NEAR(s.sched.c_slow, (1 + q) / (1 - 0.5 * q) * vslow, 1e-12 * s.sched.c_slow);
  EXPECT_EQ(s.safe.center, theta);
  EXPECT_DOUBLE_EQ(s.safe.r_safe, r_safe);
}

TEST(SafeRoundInit, SmallRhoLimit) {
  const VectorXd theta = pack_theta(kScalar.A, kScalar.B);
  const SafeRoundInit s =
      safe_round_init({theta, EstimateTag::kSharedDecoded}, 1, 1, 1e-4, 1e-9, 1e-4, kCost1, 1.0);
  EXPECT_NEAR(s.sched.c_slow, (1 + std::pow(2.0, 0.25)) * s.sched.vslow_hat,
              1e-8 * s.sched.c_slow);
  EXPECT_NEAR(s.sched.c_fast, (1 + std::sqrt(2.0)) * s.sched.vfast_hat, 1e-8 * s.sched.c_fast);
}

TEST(SafeRoundInit, OverrideAndScaling) {
  const VectorXd theta = pack_theta(kScalar.A, kScalar.B);
  const SafeRoundInit a =
      safe_round_init({theta, EstimateTag::kSharedDecoded}, 1, 1, 1e-4, 0.5, 1e-4, kCost1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(a.sched.sigma_in_sq, 1.0);
  const SafeRoundInit b =
      safe_round_init({theta, EstimateTag::kSharedDecoded}, 1, 1, 1e-4, 0.5, 1e-4, kCost1, 4.0, 1.0);
  EXPECT_NEAR(b.sched.c_slow, 2.0 * a.sched.c_slow, 1e-12 * b.sched.c_slow);
}

TEST(ProjectSafe, IdentityInsideAndClipOutside) {
  SafeSet s{vec({0.0, 0.0}), 1.0, 1, 1};
  EXPECT_EQ(project_safe(vec({0.3, -0.5}), s).theta, vec({0.3, -0.5}));
  const VectorXd p = project_safe(vec({1.7, 0.2}), s).theta;
  EXPECT_NEAR(p(0), 1.0, 1e-15);
  EXPECT_NEAR(p(1), 0.2, 1e-15);
  EXPECT_TRUE(s.contains(p));
  EXPECT_FALSE(s.contains(vec({1.7, 0.2})));
}

TEST(ProjectSafe, MatrixBlocksClippedInOperatorNorm) {
  const SystemPair c{mat({{1, 0}, {0, 1}}), mat({{0}, {0}})};
  SafeSet s{pack_theta(c.A, c.B), 0.1, 2, 1};
  const double th = 0.3;
  const MatrixXd R = mat({{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}});
  const MatrixXd D = R * mat({{3, 0}, {0, 0.05}}) * R.transpose();
  const SystemPair far{c.A + D, mat({{1}, {1}})};
  const VectorXd p = project_safe(pack_theta(far.A, far.B), s).theta;
  EXPECT_NEAR(s.distance(p), 0.1, 1e-12);
  const SystemPair q = unpack_theta(p, 2, 1);
  // Large singular value clipped, small one and directions kept.
  const MatrixXd expect = R * mat({{0.1, 0}, {0, 0.05}}) * R.transpose();
  EXPECT_LT((q.A - c.A - expect).norm(), 1e-12);
  EXPECT_NEAR(q.B.norm(), 0.1, 1e-12);
}

TEST(Schedule, BaseRadius) {
  ScheduleConstants s;
  s.c_slow = 2.0;
  s.c_fast = 4.0;
  EXPECT_DOUBLE_EQ(base_schedule(s, 1), 6.0);
  EXPECT_DOUBLE_EQ(base_schedule(s, 16), 2.0);
}

TEST(Schedule, ExplorationVariance) {
  EXPECT_DOUBLE_EQ(exploration_variance(1.0, 4), 0.5);
  EXPECT_DOUBLE_EQ(exploration_variance(1649.0, 10000), 1.0);
  EXPECT_DOUBLE_EQ(exploration_variance(0.0, 16), 0.0);
}

TEST(Schedule, FallbackShield) {
  EXPECT_FALSE(fallback_shield(4.9, 1.0, 5.0));
  EXPECT_TRUE(fallback_shield(5.1, 1.0, 5.0));
  EXPECT_FALSE(fallback_shield(1e300, 1.0, std::numeric_limits<double>::infinity()));
}

TEST(TrialConfig, JsonRoundTripAndStrictKeys) {
  TrialConfig c = theoretical_qce_config(2048, 9);
  c.sigma_in_override = 2.5;
  c.coord_index_offset = 1;
  const TrialConfig back = trial_config_from_json(trial_config_to_json(c));
  EXPECT_EQ(trial_config_to_json(back), trial_config_to_json(c));
  EXPECT_EQ(back.codec, CodecVariant::kLattice);
  EXPECT_EQ(back.horizon, 2048);
  EXPECT_EQ(back.sigma_in_override, 2.5);
  EXPECT_QCE_ERROR(trial_config_from_json(R"({"horizon": 100, "bogus": 1})"),
                   ErrorCode::kInvalidArgument);
  EXPECT_QCE_ERROR(trial_config_from_json(R"({"rho": 0.9})"), ErrorCode::kRhoOutOfRange);
}

TEST(TrialConfig, Presets) {
  const TrialConfig p = practical_qce_config(100, 1);
  EXPECT_EQ(p.codec, CodecVariant::kCoordinate);
  EXPECT_EQ(p.trigger.variant, TriggerVariant::kBootstrap);
  EXPECT_EQ(p.trigger.n_mc, 50);
  EXPECT_DOUBLE_EQ(p.trigger.rho_threshold, 0.99);
  EXPECT_DOUBLE_EQ(p.trigger.fallback_multiplier, 5.0);
  EXPECT_EQ(p.sigma_in_override, 1.0);
  EXPECT_EQ(unquantized_ce_config(100, 1).codec, CodecVariant::kUnquantized);
}

struct Endpoints {
  std::shared_ptr<const ProtocolContext> ctx;
  PlantEndpoint plant;
  ControllerEndpoint controller;
  BitStream wire;
  BitReader reader;

  Endpoints(const TrialConfig& cfg, const MatrixXd& K0)
      : ctx(std::make_shared<const ProtocolContext>(ProtocolContext::make(1, 1, kCost1, cfg))),
        plant(ctx),
        controller(ctx, K0),
        reader(wire) {}

  MatrixXd exchange(int k, const OlsResult& ols, EpochRecord& rec, std::size_t& bits) {
    GaussianStream rng(k);
    const std::size_t before = wire.size();
    for (const auto& m : plant.epoch_end(k, ols, rng, rec)) encode_message(m, ctx->wire, wire);
    bits = wire.size() - before;
    return controller.epoch(k, reader);
  }
};

TEST(Endpoints, PreSafeEpochSendsOneBitAndKeepsK0) {
  const MatrixXd K0 = mat({{-0.6}});
  Endpoints e(practical_qce_config(100, 1), K0);
  OlsResult singular = ols_at(kScalar, 1.0);
  singular.singular = true;
  EpochRecord rec;
  std::size_t bits = 0;
  EXPECT_EQ(e.exchange(2, singular, rec, bits), K0);
  EXPECT_EQ(bits, 1u);
  EXPECT_FALSE(e.controller.shared().safe);
}

TEST(Endpoints, DecodedTruthGivesOptimalGain) {
  Endpoints e(unquantized_ce_config(100, 1), mat({{-0.6}}));
  EpochRecord rec;
  std::size_t bits = 0;
  const MatrixXd K = e.exchange(3, ols_at(kScalar, 1e8), rec, bits);
  EXPECT_EQ(bits, 1u + 64u * 2u);
  EXPECT_TRUE(e.controller.shared().safe);
  EXPECT_EQ(e.controller.shared().k_safe, 3);
  EXPECT_NEAR(K(0, 0), solve_dare(kScalar, kCost1).K(0, 0), 1e-10);
  EXPECT_TRUE(e.plant.shared() == e.controller.shared());
}

TEST(Endpoints, LatticeZeroInnovationKeepsUnitMultiplier) {
  Endpoints e(theoretical_qce_config(100, 1), mat({{-0.6}}));
  const OlsResult ols = ols_at(kScalar, 1e8);
  EpochRecord rec;
  std::size_t bits = 0;
  e.exchange(3, ols, rec, bits);
  ASSERT_TRUE(e.controller.shared().safe);
  const VectorXd before = e.controller.shared().theta_tilde;
  EpochRecord track;
  e.exchange(4, ols, track, bits);
  EXPECT_EQ(track.multiplier, 1u);
  EXPECT_LE(track.recon_error, 0.5 * track.s_base * (1 + 1e-12));
  EXPECT_LE((e.controller.shared().theta_tilde - before).norm(),
            track.delta_norm + 0.5 * track.s_base);
  EXPECT_EQ(bits, static_cast<std::size_t>(1 + e.ctx->wire.index_bits));
  EXPECT_TRUE(e.plant.shared() == e.controller.shared());
}

TEST(RunTrial, DeterministicAndMirrorExact) {
  for (const TrialConfig& cfg : {practical_qce_config(3000, 4), unquantized_ce_config(3000, 4),
                                 theoretical_qce_config(3000, 4)}) {
    const TrialResult a = run_trial(kScalar, kCost1, mat({{-0.6}}), cfg);
    const TrialResult b = run_trial(kScalar, kCost1, mat({{-0.6}}), cfg);
    EXPECT_EQ(a.uplink_hex, b.uplink_hex);
    EXPECT_EQ(a.regret_curve, b.regret_curve);
    EXPECT_EQ(a.bits_curve, b.bits_curve);
    EXPECT_TRUE(a.mirror_exact);
    EXPECT_EQ(a.regret_curve.size(), 3000u);
    EXPECT_EQ(a.bits_curve.back(), a.breakdown.total());
  }
}

TEST(RunTrial, BitsCurveHasThreePhases) {
  const TrialResult r = run_trial(kScalar, kCost1, mat({{-0.6}}), practical_qce_config(10000, 2));
  ASSERT_GE(r.k_safe, 2);
  std::size_t total = 0;
  for (const auto& e : r.epochs) {
    total += e.bits;
    // Bits appear only at epoch boundaries.
    EXPECT_EQ(r.bits_curve[static_cast<std::size_t>(e.tau) - 1], total);
    if (e.tau > 4) EXPECT_EQ(r.bits_curve[static_cast<std::size_t>(e.tau) - 2], total - e.bits);
    if (e.k < r.k_safe) {
      EXPECT_EQ(e.bits, 1u);
    } else if (e.k == r.k_safe) {
      EXPECT_GT(e.bits, 1u);
    } else {
      EXPECT_LE(e.bits, 2u * (1u + 2u * 20u + 1u));
    }
  }
  EXPECT_EQ(r.breakdown.flags, static_cast<std::size_t>(r.k_safe - 1));
}

TEST(RunTrial, NoiseFreeNullRunStaysAtOrigin) {
  TrialConfig cfg = practical_qce_config(500, 1);
  cfg.sigma_w = 0.0;
  cfg.excitation_scale = 0.0;
  const MatrixXd Kstar = solve_dare(kScalar, kCost1).K;
  const TrialResult r = run_trial(kScalar, kCost1, Kstar, cfg);
  for (double v : r.regret_curve) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.k_safe, -1);
  EXPECT_FALSE(r.diverged);
}

TEST(RunTrial, RejectsBadInputs) {
  EXPECT_QCE_ERROR(run_trial(kScalar, kCost1, mat({{0.0}}), practical_qce_config(100, 1)),
                   ErrorCode::kInvalidArgument);
  EXPECT_QCE_ERROR(run_trial(kScalar, kCost1, mat({{-0.6, 0}}), practical_qce_config(100, 1)),
                   ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace qce
