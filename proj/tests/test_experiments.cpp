#include <gtest/gtest.h>

#include <filesystem>

#include "qce/experiments.hpp"
#include "test_util.hpp"

namespace qce {
namespace {

namespace fs = std::filesystem;

const BenchmarkSystem& scalar() {
  static const BenchmarkSystem b = benchmark_system("scalar");
  return b;
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
  EXPECT_QCE_ERROR(quantile({}, 0.5), ErrorCode::kInvalidArgument);
}

TEST(SampleTimes, HundredPointsEndingAtHorizon) {
  const auto ts = sample_times(10000);
  EXPECT_EQ(ts.size(), 100u);
  EXPECT_EQ(ts.front(), 100);
  EXPECT_EQ(ts.back(), 10000);
  const auto small = sample_times(7);
  EXPECT_EQ(small.size(), 7u);
  EXPECT_EQ(small.back(), 7);
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::kUnquantizedCe, Variant::kPracticalQce, Variant::kTheoreticalQce}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_QCE_ERROR(parse_variant("qce"), ErrorCode::kInvalidArgument);
}

TEST(RunExperiment, SingleTrialSummaryEqualsTrial) {
  const ExperimentOutput out =
      run_experiment(scalar(), {Variant::kPracticalQce}, 2000, 1, 9, 1);
  const TrialResult& tr = out.trials.at("practical_qce").front();
  const VariantSummary& v = out.summary.variants.front();
  EXPECT_EQ(tr.seed, 9u);
  EXPECT_DOUBLE_EQ(v.median_regret, tr.regret_curve.back());
  EXPECT_DOUBLE_EQ(v.q25_regret, tr.regret_curve.back());
  EXPECT_DOUBLE_EQ(v.median_bits, static_cast<double>(tr.breakdown.total()));
  EXPECT_DOUBLE_EQ(v.curve.back().median_bits, static_cast<double>(tr.bits_curve.back()));
  EXPECT_FALSE(out.summary.has_overhead);
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  const std::vector<Variant> vs{Variant::kUnquantizedCe, Variant::kPracticalQce};
  const ExperimentOutput a = run_experiment(scalar(), vs, 1500, 6, 40, 1);
  const ExperimentOutput b = run_experiment(scalar(), vs, 1500, 6, 40, 4);
  EXPECT_EQ(a.summary, b.summary);
  EXPECT_TRUE(a.summary.has_overhead);
  for (const auto& [name, trials] : a.trials) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      EXPECT_EQ(trials[i].seed, 40u + i);
      EXPECT_EQ(trials[i].regret_curve, b.trials.at(name)[i].regret_curve);
    }
  }
}

TEST(RunExperiment, TweakIsApplied) {
  const ExperimentOutput out = run_experiment(
      scalar(), {Variant::kPracticalQce}, 500, 2, 1, 1, [](TrialConfig& c) {
        c.sigma_w = 0.0;
        c.excitation_scale = 0.0;
      });
  EXPECT_NEAR(out.summary.variants.front().median_regret, 0.0, 1e-12);
}

TEST(RunExperiment, FilesRoundTripAndAreReproducible) {
  const fs::path d1 = fs::temp_directory_path() / "qce_exp_a";
  const fs::path d2 = fs::temp_directory_path() / "qce_exp_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  const std::vector<Variant> vs{Variant::kUnquantizedCe, Variant::kPracticalQce};
  const ExperimentOutput out = run_experiment(scalar(), vs, 1000, 3, 5, 2);
  const auto paths = write_experiment(d1.string(), out);
  write_experiment(d2.string(), run_experiment(scalar(), vs, 1000, 3, 5, 1));
  ASSERT_EQ(paths.size(), 3u);
  for (const std::string& p : paths) {
    const fs::path name = fs::path(p).filename();
    EXPECT_EQ(read_text_file(p), read_text_file((d2 / name).string())) << name;
  }
  const ExperimentSummary back =
      parse_summary_json(read_text_file((d1 / "scalar_summary.json").string()));
  EXPECT_EQ(back, out.summary);
  for (const VariantSummary& v : out.summary.variants) {
    const auto curve =
        parse_curve_csv(read_text_file((d1 / ("scalar_" + v.variant + ".csv")).string()));
    EXPECT_EQ(curve, v.curve);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(RunExperiment, CertaintyEquivalenceRegretGrowsSublinearly) {
  const ExperimentOutput out =
      run_experiment(scalar(), {Variant::kUnquantizedCe}, 10000, 15, 100);
  std::vector<double> at1e3, at1e4;
  for (const TrialResult& tr : out.trials.at("unquantized_ce")) {
    at1e3.push_back(tr.normalized_regret(1000));
    at1e4.push_back(tr.normalized_regret(10000));
  }
  EXPECT_LE(quantile(at1e4, 0.5), quantile(at1e3, 0.5));
}

TEST(TriggerGap, ScalarEmpiricalConfidence) {
  const auto rows = trigger_gap_table({scalar()}, 1 << 14, 0.1, 5, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].name, "scalar");
  EXPECT_GE(rows[0].sqrt_conf, 1e-2);
  EXPECT_LE(rows[0].sqrt_conf, 1.0);
  EXPECT_NEAR(rows[0].pnorm, 1.7738, 1e-3);
  EXPECT_NEAR(rows[0].two_eps_target, 2.0 / (9.0 * rows[0].csafe), 1e-15);
  // Target sits orders of magnitude below what the data supports.
  EXPECT_LT(rows[0].two_eps_target * 100.0, rows[0].sqrt_conf);
  EXPECT_NE(trigger_gap_csv(rows).find("scalar,"), std::string::npos);
  EXPECT_NE(trigger_gap_json(rows).find("\"sqrt_conf\""), std::string::npos);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<int> hits(257, 0);
  parallel_for(257, 5, [&](int i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

}  // namespace
}  // namespace qce
