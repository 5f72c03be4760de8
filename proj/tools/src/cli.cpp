#include "qce_cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qce/benchmark_systems.hpp"
#include "qce/codec.hpp"
#include "qce/converse.hpp"
#include "qce/errors.hpp"
#include "qce/experiments.hpp"
#include "qce/protocol.hpp"
#include "qce/verification.hpp"

namespace qce::cli {

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out_dir = "qce_out";
  std::string format;  // empty: per-command default
  int threads = 0;
};

struct SimulateOpts {
  std::string system;
  std::string variant = "practical_qce";
  std::string config;
  std::int64_t T = 10000;
  int trials = 1;
  std::optional<double> rho;
  std::optional<double> delta;
  bool curves = false;
};

struct BenchOpts {
  std::vector<std::string> systems;
  std::vector<std::string> variants{"unquantized_ce", "practical_qce"};
  std::int64_t T = 10000;
  int trials = 50;
  std::int64_t gap_T = 10000;
  int gap_seeds = 10;
};

struct ConverseOpts {
  double alpha = 0.5;
  int dx = 1;
  int du = 1;
  std::int64_t T = 1 << 20;
  double r = 0.5;
  double sigma_w = 1.0;
  double C1 = 1.0;
  std::optional<double> c;
  double rho = 0.5;
  double C0 = 1.0;
};

struct CodecOpts {
  std::vector<std::uint64_t> eg;
  std::vector<std::int64_t> signed_eg;
  bool hex = false;
  // decode
  std::string bits;
  std::string hex_in;
  bool as_signed = false;
};

struct VerifyOpts {
  bool quick = false;
  std::vector<int> only;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void check_format(const Globals& g) {
  if (!g.format.empty() && g.format != "csv" && g.format != "json") {
    throw QceError(ErrorCode::kInvalidArgument, "--format must be csv or json");
  }
}

std::string trial_csv(const TrialResult& t) {
  std::string s = "t,regret,bits\n";
  for (std::size_t i = 0; i < t.regret_curve.size(); ++i) {
    s += std::to_string(i + 1) + "," + fmt("%.17g", t.regret_curve[i]) + "," +
         std::to_string(t.bits_curve[i]) + "\n";
  }
  return s;
}

int cmd_simulate(const Globals& g, const SimulateOpts& o, std::ostream& out) {
  check_format(g);
  const BenchmarkSystem b = benchmark_system(o.system);
  const Variant v = parse_variant(o.variant);
  // Flags > config file > variant preset.
  std::optional<TrialConfig> file_cfg;
  if (!o.config.empty()) file_cfg = trial_config_from_json(read_text_file(o.config));
  auto configure = [&](TrialConfig& c) {
    const std::uint64_t seed = c.seed;
    if (file_cfg) c = *file_cfg;
    c.seed = seed;
    c.horizon = o.T;
    if (o.rho) c.rho = *o.rho;
    if (o.delta) c.delta = *o.delta;
    c.validate();
  };
  const std::string fmt_name = g.format.empty() ? "json" : g.format;

  if (o.trials == 1) {
    TrialConfig cfg = variant_config(v, o.T, g.seed);
    configure(cfg);
    const TrialResult res = run_trial(b.sys, b.cost, b.K0, cfg);
    std::filesystem::create_directories(g.out_dir);
    const std::string stem =
        (std::filesystem::path(g.out_dir) / (b.name + "_" + o.variant + "_trial")).string();
    if (fmt_name == "json") {
      write_text_file(stem + ".json", trial_result_to_json(res, o.curves) + "\n");
      out << trial_result_to_json(res, false) << "\n";
    } else {
      write_text_file(stem + ".csv", trial_csv(res));
      out << "system,variant,seed,regret,bits,k_safe,mirror_exact\n"
          << b.name << "," << o.variant << "," << res.seed << ","
          << fmt("%.6g", res.regret_curve.empty() ? 0.0 : res.regret_curve.back()) << ","
          << res.breakdown.total() << "," << res.k_safe << ","
          << (res.mirror_exact ? 1 : 0) << "\n";
    }
    return res.mirror_exact ? kOk : kFailure;
  }

  const ExperimentOutput exp =
      run_experiment(b, {v}, o.T, o.trials, g.seed, g.threads, configure);
  write_experiment(g.out_dir, exp);
  const VariantSummary& s = exp.summary.variants.front();
  if (fmt_name == "json") {
    out << summary_json(exp.summary) << "\n";
  } else {
    out << curve_csv(s);
  }
  return s.mirror_failures == 0 ? kOk : kFailure;
}

int cmd_bench(const Globals& g, const BenchOpts& o, std::ostream& out) {
  check_format(g);
  std::vector<std::string> names = o.systems.empty() ? benchmark_names() : o.systems;
  std::vector<Variant> variants;
  for (const auto& v : o.variants) variants.push_back(parse_variant(v));
  std::vector<BenchmarkSystem> systems;
  for (const auto& n : names) {
    try {
      systems.push_back(benchmark_system(n));
    } catch (const QceError& e) {
      // Explicitly requested systems must load; the default list skips
      // data files that fail validation.
      if (!o.systems.empty() || e.code() == ErrorCode::kUnknownSystem) throw;
      out << "# skipping " << n << ": " << e.what() << "\n";
    }
  }
  const std::vector<TriggerGapRow> gap =
      trigger_gap_table(systems, o.gap_T, TrialConfig{}.delta, o.gap_seeds, g.seed);
  std::filesystem::create_directories(g.out_dir);
  const bool json = g.format == "json";
  write_text_file((std::filesystem::path(g.out_dir) / "trigger_gap.csv").string(),
                  trigger_gap_csv(gap));
  write_text_file((std::filesystem::path(g.out_dir) / "trigger_gap.json").string(),
                  trigger_gap_json(gap));
  nlohmann::json summaries = nlohmann::json::array();
  int mirror_failures = 0;
  if (!json) out << "system,variant,median_regret,q25,q75,median_bits,median_k_safe\n";
  for (const auto& b : systems) {
    const ExperimentOutput exp =
        run_experiment(b, variants, o.T, o.trials, g.seed, g.threads);
    write_experiment(g.out_dir, exp);
    for (const auto& v : exp.summary.variants) {
      mirror_failures += v.mirror_failures;
      if (!json) {
        out << b.name << "," << v.variant << "," << fmt("%.6g", v.median_regret) << ","
            << fmt("%.6g", v.q25_regret) << "," << fmt("%.6g", v.q75_regret) << ","
            << fmt("%.6g", v.median_bits) << "," << fmt("%.6g", v.median_k_safe) << "\n";
      }
    }
    if (json) summaries.push_back(nlohmann::json::parse(summary_json(exp.summary)));
  }
  if (json) {
    nlohmann::json j;
    j["trigger_gap"] = nlohmann::json::parse(trigger_gap_json(gap));
    j["experiments"] = summaries;
    out << j.dump(2) << "\n";
  }
  return mirror_failures == 0 ? kOk : kFailure;
}

int cmd_converse(const Globals& g, const ConverseOpts& o, std::ostream& out) {
  check_format(g);
  const CostPair cost = CostPair::identity(o.dx, o.du);
  const double c = o.c ? *o.c : default_c(o.r, cost);
  const BoundsReport br =
      bits_lower_bound(o.alpha, o.T, o.dx, o.du, o.r, cost, o.sigma_w, o.C1, c);
  const InflationFactors f = inflation_factors(o.rho, o.C0);
  const CommBudget cb = comm_budget_bound(o.dx * (o.dx + o.du), o.rho, o.T);
  if (g.format == "csv") {
    out << "field,value\n";
    auto row = [&](const char* k, double v) { out << k << "," << fmt("%.17g", v) << "\n"; };
    row("alpha", br.alpha);
    row("T", static_cast<double>(br.T));
    row("coefficient", br.coefficient);
    row("constant_C", br.constant_C);
    row("bits_lower", br.bits_lower);
    row("J_P", br.J_P);
    row("Q_slow", f.Q_slow);
    row("Q_fast", f.Q_fast);
    row("M_rho", f.M_rho);
    row("upper_bits", cb.horizon_bits);
    return kOk;
  }
  nlohmann::json j = nlohmann::json::parse(bounds_report_to_json(br));
  j["inflation"] = {{"rho", o.rho},       {"C0", o.C0},         {"C_rho", f.C_rho},
                    {"beta", f.beta},     {"m_inf", f.m_inf},   {"M_rho", f.M_rho},
                    {"b_rho", f.b_rho},   {"Q_slow", f.Q_slow}, {"Q_fast", f.Q_fast}};
  j["upper_budget"] = {{"horizon_bits", cb.horizon_bits},
                       {"per_doubling", cb.per_doubling},
                       {"symbolic_overhead", cb.symbolic_overhead}};
  out << j.dump(2) << "\n";
  return kOk;
}

int cmd_codec_encode(const CodecOpts& o, std::ostream& out) {
  if (o.eg.empty() == o.signed_eg.empty()) {
    throw QceError(ErrorCode::kInvalidArgument, "give exactly one of --eg or --signed-eg");
  }
  BitStream bs;
  for (std::uint64_t n : o.eg) {
    if (n == 0) throw QceError(ErrorCode::kInvalidArgument, "Elias Gamma needs n >= 1");
    eg_encode(n, bs);
  }
  for (std::int64_t z : o.signed_eg) signed_eg_encode(z, bs);
  out << (o.hex ? bs.to_hex() : bs.to_bits()) << "\n";
  return kOk;
}

int cmd_codec_decode(const CodecOpts& o, std::ostream& out) {
  if (o.bits.empty() == o.hex_in.empty()) {
    throw QceError(ErrorCode::kInvalidArgument, "give exactly one of --bits or --hex");
  }
  const BitStream bs = o.bits.empty() ? BitStream::from_hex(o.hex_in) : BitStream::from_bits(o.bits);
  BitReader rd(bs);
  std::string sep;
  // Trailing zeros are byte padding; a non-zero tail that ends mid-code is
  // a truncated stream.
  while (rd.remaining() > 0 && !rd.at_padding()) {
    if (o.as_signed) {
      out << sep << signed_eg_decode(rd);
    } else {
      out << sep << eg_decode(rd);
    }
    sep = ",";
  }
  out << "\n";
  return kOk;
}

int cmd_verify(const Globals& g, const VerifyOpts& o, std::ostream& out) {
  VerifyOptions vo;
  vo.quick = o.quick;
  vo.threads = g.threads;
  const auto results = run_acceptance(vo, o.only);
  bool ok = true;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    if (g.format == "json") {
      j.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed},
                   {"seconds", r.seconds}, {"detail", r.detail}});
    } else {
      out << format_result(r) << "\n";
    }
  }
  if (g.format == "json") out << j.dump(2) << "\n";
  return ok ? kOk : kFailure;
}

bool usage_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownSystem:
    case ErrorCode::kRhoOutOfRange:
    case ErrorCode::kCChoiceViolated:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kZeroOrNegative:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantized certainty-equivalence LQR toolkit", "qce"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base seed; trial i uses seed + i")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for written files")->capture_default_str();
  app.add_option("--format", g.format, "csv or json (default depends on the command)");
  app.add_option("--threads", g.threads, "Worker threads; 0 uses $QCE_THREADS or all cores")
      ->capture_default_str();

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Run trials of one variant on one system");
  sim->add_option("--system", so.system, "scalar, double_integrator, inverted_pendulum, boeing747")
      ->required();
  sim->add_option("--variant", so.variant, "unquantized_ce, practical_qce, theoretical_qce")
      ->capture_default_str();
  sim->add_option("--config", so.config, "JSON trial config replacing the variant preset");
  sim->add_option("--T", so.T, "Horizon")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--trials", so.trials, "Number of seeds")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim->add_option("--rho", so.rho, "Codebook covering radius");
  sim->add_option("--delta", so.delta, "Failure probability");
  sim->add_flag("--curves", so.curves, "Include per-step curves in the single-trial JSON");

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Reproduce the trigger-gap and results tables");
  bench->add_option("--systems", bo.systems, "Systems (default: all that validate)")
      ->delimiter(',');
  bench->add_option("--variants", bo.variants, "Variants")->delimiter(',')->capture_default_str();
  bench->add_option("--T", bo.T, "Horizon")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--trials", bo.trials, "Paired trials per variant")->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench->add_option("--gap-T", bo.gap_T, "Horizon for the empirical confidence width")
      ->capture_default_str();
  bench->add_option("--gap-seeds", bo.gap_seeds, "Seeds for the confidence width median")
      ->capture_default_str();

  ConverseOpts co;
  auto* conv = app.add_subcommand("converse", "Print the bit lower bound and inflation factors");
  conv->add_option("--alpha", co.alpha, "Regret exponent in [1/2, 1)")->capture_default_str();
  conv->add_option("--dx", co.dx, "State dimension")->capture_default_str();
  conv->add_option("--du", co.du, "Input dimension")->capture_default_str();
  conv->add_option("--T", co.T, "Horizon")->capture_default_str();
  conv->add_option("--r", co.r, "Gain-cube radius")->capture_default_str();
  conv->add_option("--sigma-w", co.sigma_w, "Process noise scale")->capture_default_str();
  conv->add_option("--C1", co.C1, "Regret constant")->capture_default_str();
  conv->add_option("--c", co.c, "Instance scale (default 1.01 (1 + r^2))");
  conv->add_option("--rho", co.rho, "Covering radius for the inflation factors")
      ->capture_default_str();
  conv->add_option("--C0", co.C0, "Schedule constant C0")->capture_default_str();

  CodecOpts cdo;
  auto* codec = app.add_subcommand("codec", "Elias Gamma bitstream tools");
  codec->require_subcommand(1);
  auto* enc = codec->add_subcommand("encode", "Encode integers");
  enc->add_option("--eg", cdo.eg, "Positive integers, Elias Gamma")->delimiter(',');
  enc->add_option("--signed-eg", cdo.signed_eg, "Signed integers, zigzag + Elias Gamma")
      ->delimiter(',');
  enc->add_flag("--hex", cdo.hex, "Print hex (zero padded to a byte) instead of bits");
  auto* dec = codec->add_subcommand("decode", "Decode integers until the stream ends");
  dec->add_option("--bits", cdo.bits, "Bit string");
  dec->add_option("--hex", cdo.hex_in, "Hex string");
  dec->add_flag("--signed", cdo.as_signed, "Decode signed Elias Gamma");

  VerifyOpts vo;
  auto* ver = app.add_subcommand("verify", "Run the acceptance property suites");
  ver->add_flag("--quick", vo.quick, "Reduced sample sizes (smoke run)");
  ver->add_option("--only", vo.only, "Criterion ids")->delimiter(',');

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(g, so, out);
    if (bench->parsed()) return cmd_bench(g, bo, out);
    if (conv->parsed()) return cmd_converse(g, co, out);
    if (enc->parsed()) return cmd_codec_encode(cdo, out);
    if (dec->parsed()) return cmd_codec_decode(cdo, out);
    if (ver->parsed()) return cmd_verify(g, vo, out);
  } catch (const QceError& e) {
    err << "error: " << e.what() << "\n";
    return usage_error(e.code()) ? kUsage : kFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace qce::cli
