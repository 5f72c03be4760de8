#include <benchmark/benchmark.h>

#include <random>

#include "qce/benchmark_systems.hpp"
#include "qce/codec.hpp"
#include "qce/control_math.hpp"
#include "qce/protocol.hpp"

namespace {

void BM_SolveDare(benchmark::State& state) {
  const auto names = qce::benchmark_names();
  const qce::BenchmarkSystem b = qce::benchmark_system(names[state.range(0)]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qce::solve_dare(b.sys, b.cost).P.data());
  }
  state.SetLabel(b.name);
}
BENCHMARK(BM_SolveDare)->DenseRange(0, 3);

void BM_SolveDlyap(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  qce::MatrixXd M = qce::MatrixXd::Random(n, n);
  M *= 0.9 / qce::spectral_radius(M);
  const qce::MatrixXd Q = qce::MatrixXd::Identity(n, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qce::solve_dlyap(M, Q).X.data());
  }
}
BENCHMARK(BM_SolveDlyap)->Arg(2)->Arg(8)->Arg(16);

void BM_EliasGammaEncode(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::vector<std::uint64_t> values(1024);
  for (auto& v : values) v = 1 + (gen() >> 40);
  for (auto _ : state) {
    qce::BitStream bs;
    for (auto v : values) qce::eg_encode(v, bs);
    benchmark::DoNotOptimize(bs.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(values.size()));
}
BENCHMARK(BM_EliasGammaEncode);

void BM_LatticeQuantize(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const qce::CodebookConfig cb = qce::build_codebook(d, 0.5);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> N;
  qce::VectorXd delta(d);
  for (int i = 0; i < d; ++i) delta(i) = N(gen);
  delta *= 0.9 / delta.norm();
  for (auto _ : state) {
    benchmark::DoNotOptimize(qce::quantize_innovation(delta, 1.0, cb).index);
  }
  state.SetLabel(std::to_string(cb.size()) + " codewords");
}
BENCHMARK(BM_LatticeQuantize)->Arg(2)->Arg(6);

void BM_RunTrial(benchmark::State& state) {
  const qce::BenchmarkSystem b = qce::benchmark_system("scalar");
  const qce::TrialConfig cfg = qce::practical_qce_config(state.range(0), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qce::run_trial(b.sys, b.cost, b.K0, cfg).k_safe);
  }
}
BENCHMARK(BM_RunTrial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
