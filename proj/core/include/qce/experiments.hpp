#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qce/benchmark_systems.hpp"
#include "qce/protocol.hpp"

namespace qce {

enum class Variant { kUnquantizedCe, kPracticalQce, kTheoreticalQce };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
TrialConfig variant_config(Variant v, std::int64_t horizon, std::uint64_t seed);

// Worker count: $QCE_THREADS if set, else hardware concurrency; at least 1.
int worker_count();

// Runs job(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& job);

// Linear-interpolated quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct TriggerGapRow {
  std::string name;
  double pnorm = 0.0;
  double csafe = 0.0;
  double two_eps_target = 0.0;
  double sqrt_conf = 0.0;  // median over seeds
};

// sqrt(Conf_k) on the last complete epoch window before T under K0
// exploration.
double empirical_sqrt_conf(const BenchmarkSystem& b, std::int64_t T,
                           double delta, std::uint64_t seed);

std::vector<TriggerGapRow> trigger_gap_table(
    const std::vector<BenchmarkSystem>& systems, std::int64_t T, double delta,
    int n_seeds = 10, std::uint64_t base_seed = 1);

struct CurvePoint {
  std::int64_t t = 0;
  double median_regret = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double median_bits = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

struct VariantSummary {
  std::string variant;
  double median_regret = 0.0;
  double q25_regret = 0.0;
  double q75_regret = 0.0;
  double median_bits = 0.0;
  double median_k_safe = 0.0;
  int fallback_events = 0;
  int riccati_failures = 0;
  int mirror_failures = 0;
  int diverged = 0;
  std::vector<CurvePoint> curve;

  bool operator==(const VariantSummary&) const = default;
};

struct ExperimentSummary {
  std::string system;
  std::int64_t horizon = 0;
  int n_trials = 0;
  std::uint64_t base_seed = 0;
  std::vector<VariantSummary> variants;
  // (qce - ce) / ce * 100 on median final regret; present when both ran.
  bool has_overhead = false;
  double ce_median_regret = 0.0;
  double qce_median_regret = 0.0;
  double overhead_pct = 0.0;

  bool operator==(const ExperimentSummary&) const = default;
};

struct ExperimentOutput {
  ExperimentSummary summary;
  std::map<std::string, std::vector<TrialResult>> trials;
};

// Trial i of every variant uses seed base_seed + i, so variants see the same
// noise. Results are ordered by seed regardless of scheduling. `tweak` edits
// each preset config before its trial runs.
ExperimentOutput run_experiment(
    const BenchmarkSystem& b, const std::vector<Variant>& variants,
    std::int64_t T, int n_trials, std::uint64_t base_seed, int threads = 0,
    const std::function<void(TrialConfig&)>& tweak = {});

VariantSummary summarize(std::string_view variant,
                         const std::vector<TrialResult>& trials);

std::vector<std::int64_t> sample_times(std::int64_t T);

std::string curve_csv(const VariantSummary& v);
std::vector<CurvePoint> parse_curve_csv(std::string_view text);
std::string summary_json(const ExperimentSummary& s);
ExperimentSummary parse_summary_json(std::string_view text);
std::string trigger_gap_csv(const std::vector<TriggerGapRow>& rows);
std::string trigger_gap_json(const std::vector<TriggerGapRow>& rows);

// Writes <system>_<variant>.csv per variant and <system>_summary.json.
// Returns the written paths. Throws kIo.
std::vector<std::string> write_experiment(const std::string& out_dir,
                                          const ExperimentOutput& out);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace qce
