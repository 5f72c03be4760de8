#include "qce/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "qce/errors.hpp"
#include "qce/ols.hpp"

namespace qce {

namespace {

using json = nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json curve_to_json(const std::vector<CurvePoint>& c) {
  json a = json::array();
  for (const auto& p : c) {
    a.push_back({{"t", p.t},
                  {"median_regret", p.median_regret},
                  {"q25", p.q25},
                  {"q75", p.q75},
                  {"median_bits", p.median_bits}});
  }
  return a;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kUnquantizedCe: return "unquantized_ce";
    case Variant::kPracticalQce: return "practical_qce";
    case Variant::kTheoreticalQce: return "theoretical_qce";
  }
  return "unknown";
}

Variant parse_variant(std::string_view s) {
  if (s == "unquantized_ce") return Variant::kUnquantizedCe;
  if (s == "practical_qce") return Variant::kPracticalQce;
  if (s == "theoretical_qce") return Variant::kTheoreticalQce;
  throw QceError(ErrorCode::kInvalidArgument,
                 "variant must be unquantized_ce, practical_qce or theoretical_qce");
}

TrialConfig variant_config(Variant v, std::int64_t horizon, std::uint64_t seed) {
  switch (v) {
    case Variant::kUnquantizedCe: return unquantized_ce_config(horizon, seed);
    case Variant::kPracticalQce: return practical_qce_config(horizon, seed);
    case Variant::kTheoreticalQce: return theoretical_qce_config(horizon, seed);
  }
  return practical_qce_config(horizon, seed);
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("QCE_THREADS"); env && *env) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = cap;
  }
  return n;
}

void parallel_for(int n, int threads, const std::function<void(int)>& job) {
  if (threads <= 0) threads = worker_count();
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw QceError(ErrorCode::kInvalidArgument, "quantile of empty sample");
  }
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

double empirical_sqrt_conf(const BenchmarkSystem& b, std::int64_t T,
                           double delta, std::uint64_t seed) {
  int k = 2;
  while ((std::int64_t{1} << (k + 1)) <= T) ++k;
  const std::int64_t tau = std::int64_t{1} << k;
  const int dx = b.sys.dx();
  const int du = b.sys.du();
  RngStreams rng = RngStreams::from_master(seed);
  std::vector<VectorXd> xs, us;
  VectorXd x = VectorXd::Zero(dx);
  for (std::int64_t t = 1; t <= tau; ++t) {
    const VectorXd u = b.K0 * x + rng.exploration.next_vector(du);
    if (t >= tau / 2) {
      xs.push_back(x);
      us.push_back(u);
    }
    x = b.sys.A * x + b.sys.B * u + rng.process.next_vector(dx);
  }
  xs.push_back(x);
  const OlsResult ols = ols_fit(xs, us);
  return std::sqrt(confidence(ols, k, delta, dx + du).value);
}

std::vector<TriggerGapRow> trigger_gap_table(
    const std::vector<BenchmarkSystem>& systems, std::int64_t T, double delta,
    int n_seeds, std::uint64_t base_seed) {
  std::vector<TriggerGapRow> rows;
  for (const auto& b : systems) {
    TriggerGapRow r;
    r.name = b.name;
    r.pnorm = operator_norm(solve_dare(b.sys, b.cost).P);
    r.csafe = safe_constant_from_norm(r.pnorm);
    r.two_eps_target = 2.0 / (9.0 * r.csafe);
    std::vector<double> confs;
    for (int s = 0; s < n_seeds; ++s) {
      confs.push_back(empirical_sqrt_conf(b, T, delta, base_seed + s));
    }
    r.sqrt_conf = quantile(confs, 0.5);
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::int64_t> sample_times(std::int64_t T) {
  const std::int64_t step = std::max<std::int64_t>(1, T / 100);
  std::vector<std::int64_t> ts;
  for (std::int64_t t = step; t < T; t += step) ts.push_back(t);
  ts.push_back(T);
  return ts;
}

VariantSummary summarize(std::string_view variant,
                         const std::vector<TrialResult>& trials) {
  VariantSummary v;
  v.variant = std::string(variant);
  if (trials.empty()) return v;
  const std::int64_t T = trials.front().horizon;
  std::vector<double> regret, bits, ksafe;
  for (const auto& tr : trials) {
    regret.push_back(tr.regret_curve.back());
    bits.push_back(static_cast<double>(tr.breakdown.total()));
    ksafe.push_back(tr.k_safe);
    v.fallback_events += tr.fallback_count;
    v.riccati_failures += tr.riccati_failures;
    v.mirror_failures += tr.mirror_exact ? 0 : 1;
    v.diverged += tr.diverged ? 1 : 0;
  }
  v.median_regret = quantile(regret, 0.5);
  v.q25_regret = quantile(regret, 0.25);
  v.q75_regret = quantile(regret, 0.75);
  v.median_bits = quantile(bits, 0.5);
  v.median_k_safe = quantile(ksafe, 0.5);
  for (std::int64_t t : sample_times(T)) {
    std::vector<double> r, b;
    for (const auto& tr : trials) {
      r.push_back(tr.regret_curve[static_cast<std::size_t>(t - 1)]);
      b.push_back(tr.bits_curve[static_cast<std::size_t>(t - 1)]);
    }
    v.curve.push_back({t, quantile(r, 0.5), quantile(r, 0.25),
                       quantile(r, 0.75), quantile(b, 0.5)});
  }
  return v;
}

ExperimentOutput run_experiment(const BenchmarkSystem& b,
                                const std::vector<Variant>& variants,
                                std::int64_t T, int n_trials,
                                std::uint64_t base_seed, int threads,
                                const std::function<void(TrialConfig&)>& tweak) {
  if (n_trials < 1) {
    throw QceError(ErrorCode::kInvalidArgument, "n_trials must be >= 1");
  }
  const int nv = static_cast<int>(variants.size());
  std::vector<TrialResult> results(static_cast<std::size_t>(nv * n_trials));
  parallel_for(nv * n_trials, threads, [&](int job) {
    const int vi = job / n_trials;
    const int i = job % n_trials;
    TrialConfig cfg = variant_config(variants[vi], T, base_seed + i);
    if (tweak) tweak(cfg);
    results[job] = run_trial(b.sys, b.cost, b.K0, cfg);
  });

  ExperimentOutput out;
  out.summary.system = b.name;
  out.summary.horizon = T;
  out.summary.n_trials = n_trials;
  out.summary.base_seed = base_seed;
  for (int vi = 0; vi < nv; ++vi) {
    const std::string name(to_string(variants[vi]));
    std::vector<TrialResult> trials(results.begin() + vi * n_trials,
                                    results.begin() + (vi + 1) * n_trials);
    out.summary.variants.push_back(summarize(name, trials));
    out.trials[name] = std::move(trials);
  }
  const VariantSummary* ce = nullptr;
  const VariantSummary* qce = nullptr;
  for (const auto& v : out.summary.variants) {
    if (v.variant == "unquantized_ce") ce = &v;
    if (v.variant == "practical_qce") qce = &v;
  }
  if (ce && qce) {
    out.summary.has_overhead = true;
    out.summary.ce_median_regret = ce->median_regret;
    out.summary.qce_median_regret = qce->median_regret;
    out.summary.overhead_pct =
        (qce->median_regret - ce->median_regret) / ce->median_regret * 100.0;
  }
  return out;
}

std::string curve_csv(const VariantSummary& v) {
  std::string s = "t,median_regret,q25,q75,median_bits\n";
  for (const auto& p : v.curve) {
    s += std::to_string(p.t) + "," + fmt17(p.median_regret) + "," +
         fmt17(p.q25) + "," + fmt17(p.q75) + "," + fmt17(p.median_bits) + "\n";
  }
  return s;
}

std::vector<CurvePoint> parse_curve_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "t,median_regret,q25,q75,median_bits") {
    throw QceError(ErrorCode::kInvalidArgument, "unexpected CSV header");
  }
  std::vector<CurvePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CurvePoint p;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw QceError(ErrorCode::kInvalidArgument, "CSV row needs 5 fields");
    }
    p.t = std::stoll(cells[0]);
    p.median_regret = std::strtod(cells[1].c_str(), nullptr);
    p.q25 = std::strtod(cells[2].c_str(), nullptr);
    p.q75 = std::strtod(cells[3].c_str(), nullptr);
    p.median_bits = std::strtod(cells[4].c_str(), nullptr);
    out.push_back(p);
  }
  return out;
}

std::string summary_json(const ExperimentSummary& s) {
  json j;
  j["system"] = s.system;
  j["horizon"] = s.horizon;
  j["n_trials"] = s.n_trials;
  j["base_seed"] = s.base_seed;
  j["has_overhead"] = s.has_overhead;
  j["ce_median_regret"] = s.ce_median_regret;
  j["qce_median_regret"] = s.qce_median_regret;
  j["overhead_pct"] = s.overhead_pct;
  json vs = json::array();
  for (const auto& v : s.variants) {
    vs.push_back({{"variant", v.variant},
                  {"median_regret", v.median_regret},
                  {"q25_regret", v.q25_regret},
                  {"q75_regret", v.q75_regret},
                  {"median_bits", v.median_bits},
                  {"median_k_safe", v.median_k_safe},
                  {"fallback_events", v.fallback_events},
                  {"riccati_failures", v.riccati_failures},
                  {"mirror_failures", v.mirror_failures},
                  {"diverged", v.diverged},
                  {"curve", curve_to_json(v.curve)}});
  }
  j["variants"] = std::move(vs);
  return j.dump(2);
}

ExperimentSummary parse_summary_json(std::string_view text) {
  ExperimentSummary s;
  try {
    const json j = json::parse(text);
    s.system = j.at("system").get<std::string>();
    s.horizon = j.at("horizon").get<std::int64_t>();
    s.n_trials = j.at("n_trials").get<int>();
    s.base_seed = j.at("base_seed").get<std::uint64_t>();
    s.has_overhead = j.at("has_overhead").get<bool>();
    s.ce_median_regret = j.at("ce_median_regret").get<double>();
    s.qce_median_regret = j.at("qce_median_regret").get<double>();
    s.overhead_pct = j.at("overhead_pct").get<double>();
    for (const auto& jv : j.at("variants")) {
      VariantSummary v;
      v.variant = jv.at("variant").get<std::string>();
      v.median_regret = jv.at("median_regret").get<double>();
      v.q25_regret = jv.at("q25_regret").get<double>();
      v.q75_regret = jv.at("q75_regret").get<double>();
      v.median_bits = jv.at("median_bits").get<double>();
      v.median_k_safe = jv.at("median_k_safe").get<double>();
      v.fallback_events = jv.at("fallback_events").get<int>();
      v.riccati_failures = jv.at("riccati_failures").get<int>();
      v.mirror_failures = jv.at("mirror_failures").get<int>();
      v.diverged = jv.at("diverged").get<int>();
      for (const auto& jp : jv.at("curve")) {
        v.curve.push_back({jp.at("t").get<std::int64_t>(),
                           jp.at("median_regret").get<double>(),
                           jp.at("q25").get<double>(), jp.at("q75").get<double>(),
                           jp.at("median_bits").get<double>()});
      }
      s.variants.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string("bad summary JSON: ") + e.what());
  }
  return s;
}

std::string trigger_gap_csv(const std::vector<TriggerGapRow>& rows) {
  std::string s = "system,pnorm,csafe,two_eps_target,sqrt_conf\n";
  for (const auto& r : rows) {
    s += r.name + "," + fmt17(r.pnorm) + "," + fmt17(r.csafe) + "," +
         fmt17(r.two_eps_target) + "," + fmt17(r.sqrt_conf) + "\n";
  }
  return s;
}

std::string trigger_gap_json(const std::vector<TriggerGapRow>& rows) {
  json a = json::array();
  for (const auto& r : rows) {
    a.push_back({{"system", r.name},
                 {"pnorm", r.pnorm},
                 {"csafe", r.csafe},
                 {"two_eps_target", r.two_eps_target},
                 {"sqrt_conf", r.sqrt_conf}});
  }
  return a.dump(2);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw QceError(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw QceError(ErrorCode::kIo, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw QceError(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> write_experiment(const std::string& out_dir,
                                          const ExperimentOutput& out) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw QceError(ErrorCode::kIo, "cannot create " + out_dir);
  std::vector<std::string> paths;
  for (const auto& v : out.summary.variants) {
    const std::string p = (std::filesystem::path(out_dir) /
                           (out.summary.system + "_" + v.variant + ".csv"))
                              .string();
    write_text_file(p, curve_csv(v));
    paths.push_back(p);
  }
  const std::string p =
      (std::filesystem::path(out_dir) / (out.summary.system + "_summary.json"))
          .string();
  write_text_file(p, summary_json(out.summary));
  paths.push_back(p);
  return paths;
}

}  // namespace qce
