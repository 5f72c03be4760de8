#include "qce/protocol.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "qce/errors.hpp"

namespace qce {

namespace {

constexpr double kPopInflation = 1.0835;
constexpr double kDivergedNorm = 1e100;

using json = nlohmann::json;

MatrixXd clip_singular_values(const MatrixXd& D, double r) {
  if (D.size() == 0) return D;
  Eigen::JacobiSVD<MatrixXd> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
  VectorXd s = svd.singularValues();
  if (s.size() == 0 || s(0) <= r) return D;
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::min(s(i), r);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

void become_safe(SharedState& state, const VectorXd& theta, int k,
                 const ProtocolContext& ctx) {
  const double r = safe_radius(theta, ctx.dx, ctx.du, ctx.cost);
  const SafeRoundInit sri = safe_round_init(
      {theta, EstimateTag::kSharedDecoded}, ctx.dx, ctx.du, r, ctx.cfg.rho,
      ctx.cfg.delta, ctx.cost, ctx.cfg.c0, ctx.cfg.sigma_in_override);
  state.safe = true;
  state.k_safe = k;
  state.theta_tilde = theta;
  state.sched = sri.sched;
  state.safe_set = sri.safe;
}

MessageKind tracking_kind(CodecVariant codec) {
  switch (codec) {
    case CodecVariant::kLattice: return MessageKind::kTrack;
    case CodecVariant::kCoordinate: return MessageKind::kCoordTrack;
    case CodecVariant::kUnquantized: return MessageKind::kRawTheta;
  }
  return MessageKind::kRawTheta;
}

void count_bits(const UplinkMessage& msg, const WireFormat& wire,
                BitsBreakdown& b) {
  const std::size_t bits = message_cost(msg, wire);
  switch (kind_of(msg)) {
    case MessageKind::kSafeFlag: b.flags += bits; break;
    case MessageKind::kInit: b.init += bits; break;
    case MessageKind::kTrack:
      b.indices += static_cast<std::size_t>(wire.index_bits);
      b.multipliers += bits - static_cast<std::size_t>(wire.index_bits);
      break;
    case MessageKind::kCoordTrack: b.indices += bits; break;
    case MessageKind::kRawTheta: b.raw += bits; break;
  }
}

}  // namespace

std::string_view to_string(TriggerVariant v) {
  return v == TriggerVariant::kTheoretical ? "theoretical" : "bootstrap";
}

std::string_view to_string(CodecVariant v) {
  switch (v) {
    case CodecVariant::kLattice: return "lattice";
    case CodecVariant::kCoordinate: return "coordinate";
    case CodecVariant::kUnquantized: return "unquantized";
  }
  return "unknown";
}

TriggerVariant parse_trigger_variant(std::string_view s) {
  if (s == "theoretical") return TriggerVariant::kTheoretical;
  if (s == "bootstrap") return TriggerVariant::kBootstrap;
  throw QceError(ErrorCode::kInvalidArgument,
                 "trigger variant must be theoretical or bootstrap");
}

CodecVariant parse_codec_variant(std::string_view s) {
  if (s == "lattice") return CodecVariant::kLattice;
  if (s == "coordinate") return CodecVariant::kCoordinate;
  if (s == "unquantized") return CodecVariant::kUnquantized;
  throw QceError(ErrorCode::kInvalidArgument,
                 "codec must be lattice, coordinate or unquantized");
}

VectorXd pack_theta(const MatrixXd& A, const MatrixXd& B) {
  const Eigen::Index dx = A.rows();
  const Eigen::Index d = A.cols() + B.cols();
  VectorXd theta(dx * d);
  for (Eigen::Index i = 0; i < dx; ++i) {
    theta.segment(i * d, A.cols()) = A.row(i).transpose();
    theta.segment(i * d + A.cols(), B.cols()) = B.row(i).transpose();
  }
  return theta;
}

SystemPair unpack_theta(const VectorXd& theta, int dx, int du) {
  const int d = dx + du;
  if (theta.size() != dx * d) {
    throw QceError(ErrorCode::kDimensionMismatch, "theta length");
  }
  SystemPair sys{MatrixXd(dx, dx), MatrixXd(dx, du)};
  for (int i = 0; i < dx; ++i) {
    sys.A.row(i) = theta.segment(i * d, dx).transpose();
    sys.B.row(i) = theta.segment(i * d + dx, du).transpose();
  }
  return sys;
}

double SafeSet::distance(const VectorXd& theta) const {
  const SystemPair x = unpack_theta(theta, dx, du);
  const SystemPair c = unpack_theta(center, dx, du);
  return std::max(operator_norm(x.A - c.A), operator_norm(x.B - c.B));
}

bool SafeSet::contains(const VectorXd& theta, double rel_tol) const {
  return distance(theta) <= r_safe * (1.0 + rel_tol);
}

bool theoretical_trigger(const OlsResult& ols, const ConfidenceScalar& conf,
                         const CostPair& cost) {
  if (ols.singular || min_eigenvalue(ols.Lambda) < 1.0) return false;
  if (!std::isfinite(conf.value)) return false;
  double csafe;
  try {
    csafe = safe_constant(ols.system(), cost);
  } catch (const QceError&) {
    return false;
  }
  return std::sqrt(conf.value) <= 1.0 / (9.0 * csafe);
}

bool bootstrap_trigger(const OlsResult& ols, double sigma_w,
                       const TriggerConfig& cfg, const CostPair& cost,
                       GaussianStream& rng) {
  if (ols.singular) return false;
  MatrixXd K;
  try {
    K = solve_dare(ols.system(), cost).K;
  } catch (const QceError&) {
    return false;
  }
  if (cfg.n_mc <= 0) return true;
  const auto samples = sample_ols_posterior(ols, sigma_w, cfg.n_mc, rng);
  for (const SystemPair& s : samples) {
    if (spectral_radius(s.A + s.B * K) >= cfg.rho_threshold) return false;
  }
  return true;
}

double safe_radius(const VectorXd& theta, int dx, int du, const CostPair& cost) {
  try {
    return 1.0 / (3.0 * safe_constant(unpack_theta(theta, dx, du), cost));
  } catch (const QceError& e) {
    throw QceError(ErrorCode::kRiccatiFailure, e.what());
  }
}

SafeRoundInit safe_round_init(const ParamEstimate& decoded, int dx, int du,
                              double r_safe, double rho, double delta,
                              const CostPair& cost, double c0,
                              std::optional<double> sigma_in_override) {
  const SystemPair sys = unpack_theta(decoded.theta, dx, du);
  RiccatiSolution sol;
  try {
    sol = solve_dare(sys, cost);
  } catch (const QceError& e) {
    throw QceError(ErrorCode::kRiccatiFailure, e.what());
  }
  ScheduleConstants sc;
  sc.c0 = c0;
  sc.pop_hat = kPopInflation * operator_norm(sol.P);
  const double log_pd = std::max(0.0, std::log2(sc.pop_hat / delta));
  sc.sigma_in_sq = std::sqrt(double(dx)) * std::pow(sc.pop_hat, 4.5) *
                   std::max(1.0, operator_norm(sys.B) + r_safe) *
                   std::sqrt(log_pd);
  if (sigma_in_override) sc.sigma_in_sq = *sigma_in_override;
  const double log_inv_delta = std::log2(1.0 / delta);
  sc.vslow_hat = std::sqrt(c0) * sc.pop_hat *
                 std::sqrt(double(dx) * du * log_inv_delta / sc.sigma_in_sq);
  sc.vfast_hat =
      std::sqrt(c0) * std::pow(sc.pop_hat, 1.5) * dx * log_inv_delta;
  const double q = std::pow(2.0, 0.25);
  sc.c_slow = (1.0 + q) / (1.0 - rho * q) * sc.vslow_hat;
  sc.c_fast = (1.0 + std::sqrt(2.0)) / (1.0 - rho * std::sqrt(2.0)) * sc.vfast_hat;

  SafeRoundInit out;
  out.sched = sc;
  out.safe = SafeSet{decoded.theta, r_safe, dx, du};
  return out;
}

ParamEstimate project_safe(const VectorXd& theta, const SafeSet& safe,
                           EstimateTag tag) {
  const SystemPair x = unpack_theta(theta, safe.dx, safe.du);
  const SystemPair c = unpack_theta(safe.center, safe.dx, safe.du);
  const MatrixXd A = c.A + clip_singular_values(x.A - c.A, safe.r_safe);
  const MatrixXd B = c.B + clip_singular_values(x.B - c.B, safe.r_safe);
  return {pack_theta(A, B), tag};
}

double base_schedule(const ScheduleConstants& sched, std::int64_t tau) {
  const double t = static_cast<double>(tau);
  return sched.c_slow * std::pow(t, -0.25) + sched.c_fast / std::sqrt(t);
}

double exploration_variance(double sigma_in_sq, std::int64_t tau) {
  return std::min(1.0, sigma_in_sq / std::sqrt(static_cast<double>(tau)));
}

bool fallback_shield(double x_norm, double presafe_max_norm, double mult) {
  return x_norm > mult * presafe_max_norm;
}

void TrialConfig::validate() const {
  if (horizon < 4) {
    throw QceError(ErrorCode::kInvalidArgument, "horizon must be >= 4");
  }
  if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) {
    throw QceError(ErrorCode::kInvalidArgument, "sigma_w must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "delta must lie in (0,1)");
  }
  if (!(rho > 0.0 && rho < std::sqrt(0.5))) {
    throw QceError(ErrorCode::kRhoOutOfRange, "rho must lie in (0, 1/sqrt 2)");
  }
  if (!(c0 > 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "c0 must be positive");
  }
  if (trigger.n_mc < 0 || !(trigger.rho_threshold > 0.0) ||
      !(trigger.fallback_multiplier > 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "invalid trigger settings");
  }
  if (sigma_in_override && !(*sigma_in_override >= 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "sigma_in_override must be >= 0");
  }
  if (coord_index_offset != 0 && coord_index_offset != 1) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "coord_index_offset must be 0 or 1");
  }
  if (!(excitation_scale >= 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "excitation_scale must be >= 0");
  }
}

TrialConfig trial_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw QceError(ErrorCode::kInvalidArgument, "config must be an object");
  }
  static const char* kKeys[] = {
      "horizon", "seed", "sigma_w", "delta", "rho", "c0", "codec", "trigger",
      "sigma_in_override", "project_safe_set", "coord_index_offset",
      "excitation_scale"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    if (!known) {
      throw QceError(ErrorCode::kInvalidArgument, "unknown config key: " + key);
    }
  }
  TrialConfig c;
  try {
    c.horizon = j.value("horizon", c.horizon);
    c.seed = j.value("seed", c.seed);
    c.sigma_w = j.value("sigma_w", c.sigma_w);
    c.delta = j.value("delta", c.delta);
    c.rho = j.value("rho", c.rho);
    c.c0 = j.value("c0", c.c0);
    if (j.contains("codec")) {
      c.codec = parse_codec_variant(j.at("codec").get<std::string>());
    }
    if (j.contains("trigger")) {
      const json& t = j.at("trigger");
      if (t.contains("variant")) {
        c.trigger.variant =
            parse_trigger_variant(t.at("variant").get<std::string>());
      }
      c.trigger.n_mc = t.value("n_mc", c.trigger.n_mc);
      c.trigger.rho_threshold = t.value("rho_threshold", c.trigger.rho_threshold);
      c.trigger.fallback_multiplier =
          t.value("fallback_multiplier", c.trigger.fallback_multiplier);
    }
    if (j.contains("sigma_in_override") && !j.at("sigma_in_override").is_null()) {
      c.sigma_in_override = j.at("sigma_in_override").get<double>();
    }
    c.project_safe_set = j.value("project_safe_set", c.project_safe_set);
    c.coord_index_offset = j.value("coord_index_offset", c.coord_index_offset);
    c.excitation_scale = j.value("excitation_scale", c.excitation_scale);
  } catch (const json::exception& e) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string("bad config field: ") + e.what());
  }
  c.validate();
  return c;
}

std::string trial_config_to_json(const TrialConfig& c) {
  json j;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["sigma_w"] = c.sigma_w;
  j["delta"] = c.delta;
  j["rho"] = c.rho;
  j["c0"] = c.c0;
  j["codec"] = std::string(to_string(c.codec));
  j["trigger"] = {{"variant", std::string(to_string(c.trigger.variant))},
                  {"n_mc", c.trigger.n_mc},
                  {"rho_threshold", c.trigger.rho_threshold},
                  {"fallback_multiplier", c.trigger.fallback_multiplier}};
  j["sigma_in_override"] =
      c.sigma_in_override ? json(*c.sigma_in_override) : json(nullptr);
  j["project_safe_set"] = c.project_safe_set;
  j["coord_index_offset"] = c.coord_index_offset;
  j["excitation_scale"] = c.excitation_scale;
  return j.dump(2);
}

TrialConfig practical_qce_config(std::int64_t horizon, std::uint64_t seed) {
  TrialConfig c;
  c.horizon = horizon;
  c.seed = seed;
  c.codec = CodecVariant::kCoordinate;
  c.trigger.variant = TriggerVariant::kBootstrap;
  c.sigma_in_override = 1.0;
  c.project_safe_set = false;
  return c;
}

TrialConfig unquantized_ce_config(std::int64_t horizon, std::uint64_t seed) {
  TrialConfig c = practical_qce_config(horizon, seed);
  c.codec = CodecVariant::kUnquantized;
  return c;
}

TrialConfig theoretical_qce_config(std::int64_t horizon, std::uint64_t seed) {
  TrialConfig c;
  c.horizon = horizon;
  c.seed = seed;
  c.codec = CodecVariant::kLattice;
  c.trigger.variant = TriggerVariant::kBootstrap;
  c.project_safe_set = true;
  return c;
}

ProtocolContext ProtocolContext::make(int dx, int du, const CostPair& cost,
                                      const TrialConfig& cfg) {
  ProtocolContext ctx;
  ctx.dx = dx;
  ctx.du = du;
  ctx.cost = cost;
  ctx.cfg = cfg;
  ctx.wire.ds = dx * (dx + du);
  ctx.wire.coord_index_offset = cfg.coord_index_offset;
  if (cfg.codec == CodecVariant::kLattice) {
    auto cb = std::make_shared<CodebookConfig>(build_codebook(ctx.wire.ds, cfg.rho));
    ctx.wire.index_bits = cb->index_bits;
    ctx.codebook = std::move(cb);
  }
  return ctx;
}

bool SharedState::operator==(const SharedState& o) const {
  auto same_vec = [](const VectorXd& a, const VectorXd& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
  };
  return safe == o.safe && k_safe == o.k_safe &&
         same_vec(theta_tilde, o.theta_tilde) &&
         same_vec(safe_set.center, o.safe_set.center) &&
         safe_set.r_safe == o.safe_set.r_safe && sched == o.sched;
}

void apply_message(SharedState& state, const UplinkMessage& msg, int k,
                   const ProtocolContext& ctx) {
  const std::int64_t tau = std::int64_t{1} << k;
  switch (kind_of(msg)) {
    case MessageKind::kSafeFlag:
      break;
    case MessageKind::kInit:
      become_safe(state, reconstruct_init(std::get<InitMessage>(msg)), k, ctx);
      break;
    case MessageKind::kRawTheta: {
      const VectorXd& theta = std::get<RawThetaMessage>(msg).theta;
      if (state.safe) {
        state.theta_tilde = theta;
      } else {
        become_safe(state, theta, k, ctx);
      }
      break;
    }
    case MessageKind::kTrack: {
      const auto& m = std::get<TrackMessage>(msg);
      const double s = static_cast<double>(m.multiplier) *
                       base_schedule(state.sched, tau);
      state.theta_tilde +=
          s * ctx.codebook->codewords.col(static_cast<Eigen::Index>(m.index));
      break;
    }
    case MessageKind::kCoordTrack:
      state.theta_tilde +=
          reconstruct_coord(std::get<CoordTrackMessage>(msg), tau);
      break;
  }
}

PlantEndpoint::PlantEndpoint(std::shared_ptr<const ProtocolContext> ctx)
    : ctx_(std::move(ctx)) {}

std::vector<UplinkMessage> PlantEndpoint::epoch_end(int k, const OlsResult& ols,
                                                    GaussianStream& bootstrap_rng,
                                                    EpochRecord& record) {
  const ProtocolContext& c = *ctx_;
  const std::int64_t tau = std::int64_t{1} << k;
  record.k = k;
  record.tau = tau;
  std::vector<UplinkMessage> out;
  const VectorXd theta_hat = pack_theta(ols.Ahat, ols.Bhat);

  if (!state_.safe) {
    bool fire;
    if (c.cfg.trigger.variant == TriggerVariant::kTheoretical) {
      fire = theoretical_trigger(
          ols, confidence(ols, k, c.cfg.delta, c.dx + c.du), c.cost);
    } else {
      fire = bootstrap_trigger(ols, c.cfg.sigma_w, c.cfg.trigger, c.cost,
                               bootstrap_rng);
    }
    UplinkMessage payload;
    if (fire) {
      // The trigger only counts once the decoded centre admits a safe radius,
      // so both endpoints can always finish the initialization.
      try {
        VectorXd decoded;
        if (c.cfg.codec == CodecVariant::kUnquantized) {
          payload = RawThetaMessage{theta_hat};
          decoded = theta_hat;
        } else {
          const double eps = 1.0 / (9.0 * safe_constant(ols.system(), c.cost));
          InitResult init = absolute_init(theta_hat, eps);
          payload = init.msg;
          decoded = init.reconstruction;
        }
        SharedState probe;
        become_safe(probe, decoded, k, c);
      } catch (const QceError&) {
        fire = false;
      }
    }
    out.emplace_back(SafeFlag{fire});
    if (fire) out.push_back(std::move(payload));
    for (const auto& m : out) apply_message(state_, m, k, c);
    if (fire) {
      record.recon_error = (state_.theta_tilde - theta_hat).norm();
    }
  } else {
    const VectorXd theta_bar =
        c.cfg.project_safe_set ? project_safe(theta_hat, state_.safe_set).theta
                               : theta_hat;
    const VectorXd delta = theta_bar - state_.theta_tilde;
    record.delta_norm = delta.norm();
    switch (c.cfg.codec) {
      case CodecVariant::kLattice: {
        record.s_base = base_schedule(state_.sched, tau);
        record.multiplier = adaptive_multiplier(record.delta_norm, record.s_base);
        record.s = static_cast<double>(record.multiplier) * record.s_base;
        const QuantizeResult q = quantize_innovation(delta, record.s, *c.codebook);
        out.emplace_back(TrackMessage{record.multiplier, q.index});
        break;
      }
      case CodecVariant::kCoordinate:
        out.emplace_back(coord_quantize(delta, tau, c.cfg.coord_index_offset).msg);
        break;
      case CodecVariant::kUnquantized:
        out.emplace_back(RawThetaMessage{theta_bar});
        break;
    }
    for (const auto& m : out) apply_message(state_, m, k, c);
    record.recon_error = (state_.theta_tilde - theta_bar).norm();
  }
  record.safe = state_.safe;
  return out;
}

ControllerEndpoint::ControllerEndpoint(std::shared_ptr<const ProtocolContext> ctx,
                                       MatrixXd K0)
    : ctx_(std::move(ctx)), gain_(std::move(K0)) {}

MatrixXd ControllerEndpoint::epoch(int k, BitReader& uplink) {
  const ProtocolContext& c = *ctx_;
  if (!state_.safe) {
    const UplinkMessage flag = decode_message(uplink, MessageKind::kSafeFlag, c.wire);
    apply_message(state_, flag, k, c);
    if (!std::get<SafeFlag>(flag).safe) return gain_;
    const MessageKind kind = c.cfg.codec == CodecVariant::kUnquantized
                                 ? MessageKind::kRawTheta
                                 : MessageKind::kInit;
    apply_message(state_, decode_message(uplink, kind, c.wire), k, c);
  } else {
    apply_message(state_, decode_message(uplink, tracking_kind(c.cfg.codec), c.wire),
                  k, c);
  }
  checked_ = c.cfg.project_safe_set
                 ? project_safe(state_.theta_tilde, state_.safe_set,
                                EstimateTag::kControllerProjected)
                       .theta
                 : state_.theta_tilde;
  try {
    gain_ = solve_dare(unpack_theta(checked_, c.dx, c.du), c.cost).K;
    last_failed_ = false;
  } catch (const QceError&) {
    last_failed_ = true;
  }
  return gain_;
}

std::vector<std::uint64_t> TrialResult::multipliers() const {
  std::vector<std::uint64_t> m;
  for (const auto& e : epochs) {
    if (e.multiplier > 0) m.push_back(e.multiplier);
  }
  return m;
}

double TrialResult::normalized_regret(std::int64_t t) const {
  return regret_curve.at(static_cast<std::size_t>(t - 1)) /
         std::sqrt(static_cast<double>(t));
}

std::vector<double> TrialResult::normalized_regret_curve() const {
  std::vector<double> out(regret_curve.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = regret_curve[i] / std::sqrt(static_cast<double>(i + 1));
  }
  return out;
}

TrialResult run_trial(const SystemPair& sys, const CostPair& cost,
                      const MatrixXd& K0, const TrialConfig& cfg) {
  cfg.validate();
  sys.validate();
  cost.validate();
  const int dx = sys.dx();
  const int du = sys.du();
  if (K0.rows() != du || K0.cols() != dx) {
    throw QceError(ErrorCode::kDimensionMismatch, "K0 must be du x dx");
  }
  if (spectral_radius(sys.A + sys.B * K0) >= 1.0) {
    throw QceError(ErrorCode::kInvalidArgument, "K0 is not stabilizing");
  }
  RiccatiSolution truth;
  try {
    truth = solve_dare(sys, cost);
  } catch (const QceError& e) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string("true system has no stabilizing DARE solution: ") +
                       e.what());
  }

  auto ctx = std::make_shared<const ProtocolContext>(
      ProtocolContext::make(dx, du, cost, cfg));
  PlantEndpoint plant(ctx);
  ControllerEndpoint controller(ctx, K0);
  RngStreams rng = RngStreams::from_master(cfg.seed);

  TrialResult res;
  res.seed = cfg.seed;
  res.horizon = cfg.horizon;
  res.jstar = cfg.sigma_w * cfg.sigma_w * truth.P.trace();
  const auto T = static_cast<std::size_t>(cfg.horizon);
  res.regret_curve.reserve(T);
  res.bits_curve.reserve(T);

  BitStream uplink;
  BitReader reader(uplink);
  std::vector<VectorXd> xs(T + 2), us(T + 1);
  VectorXd x = VectorXd::Zero(dx);
  xs[1] = x;
  MatrixXd K = K0;
  double sigma = 1.0;
  bool fallback_active = false;
  double presafe_max = 0.0;
  int k = 2;
  std::size_t boundary = 4;
  CostAccumulator acc(res.jstar);

  for (std::size_t t = 1; t <= T; ++t) {
    if (t == boundary) {
      const std::size_t start = boundary / 2;
      const OlsResult ols = ols_fit(
          std::span<const VectorXd>(xs.data() + start, boundary - start + 1),
          std::span<const VectorXd>(us.data() + start, boundary - start));
      EpochRecord rec;
      const auto msgs = plant.epoch_end(k, ols, rng.bootstrap, rec);
      const std::size_t before = uplink.size();
      for (const auto& m : msgs) {
        encode_message(m, ctx->wire, uplink);
        count_bits(m, ctx->wire, res.breakdown);
      }
      K = controller.epoch(k, reader);
      rec.bits = uplink.size() - before;
      rec.mirror_match = plant.shared() == controller.shared();
      rec.riccati_failure = controller.last_riccati_failed();
      res.mirror_exact = res.mirror_exact && rec.mirror_match;
      if (rec.riccati_failure) ++res.riccati_failures;
      if (controller.shared().safe) {
        sigma = std::sqrt(exploration_variance(controller.shared().sched.sigma_in_sq,
                                               std::int64_t{1} << k));
      }
      fallback_active = false;
      res.epochs.push_back(rec);
      ++k;
      boundary *= 2;
    }

    const VectorXd g = rng.exploration.next_vector(du);
    VectorXd u;
    const double xn = x.norm();
    if (!controller.shared().safe) {
      u = K0 * x + cfg.excitation_scale * g;
      presafe_max = std::max(presafe_max, xn);
    } else {
      if (!fallback_active &&
          fallback_shield(xn, presafe_max, cfg.trigger.fallback_multiplier)) {
        fallback_active = true;
        ++res.fallback_count;
      }
      u = fallback_active ? VectorXd(K0 * x + g) : VectorXd(K * x + sigma * g);
    }
    acc.add(stage_cost(x, u, cost));
    res.bits_curve.push_back(static_cast<std::uint32_t>(uplink.size()));
    us[t] = u;
    x = sys.A * x + sys.B * u + cfg.sigma_w * rng.process.next_vector(dx);
    xs[t + 1] = x;
    if (!x.allFinite() || x.norm() > kDivergedNorm) {
      res.diverged = true;
      break;
    }
  }

  res.regret_curve = acc.regret_curve();
  while (res.regret_curve.size() < T) {
    res.regret_curve.push_back(std::numeric_limits<double>::infinity());
    res.bits_curve.push_back(res.bits_curve.empty() ? 0 : res.bits_curve.back());
  }
  res.k_safe = controller.shared().k_safe;
  res.uplink_hex = uplink.to_hex();
  return res;
}

std::string trial_result_to_json(const TrialResult& r, bool with_curves) {
  json j;
  j["seed"] = r.seed;
  j["horizon"] = r.horizon;
  j["jstar"] = r.jstar;
  j["final_regret"] = r.regret_curve.empty() ? 0.0 : r.regret_curve.back();
  j["total_bits"] = r.breakdown.total();
  j["bits_breakdown"] = {{"flags", r.breakdown.flags},
                         {"init", r.breakdown.init},
                         {"multipliers", r.breakdown.multipliers},
                         {"indices", r.breakdown.indices},
                         {"raw", r.breakdown.raw}};
  j["k_safe"] = r.k_safe;
  j["multipliers"] = r.multipliers();
  j["fallback_count"] = r.fallback_count;
  j["riccati_failures"] = r.riccati_failures;
  j["mirror_exact"] = r.mirror_exact;
  j["diverged"] = r.diverged;
  j["uplink_hex"] = r.uplink_hex;
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"k", e.k},
                      {"tau", e.tau},
                      {"safe", e.safe},
                      {"multiplier", e.multiplier},
                      {"s_base", e.s_base},
                      {"s", e.s},
                      {"delta_norm", e.delta_norm},
                      {"recon_error", e.recon_error},
                      {"bits", e.bits},
                      {"mirror_match", e.mirror_match},
                      {"riccati_failure", e.riccati_failure}});
  }
  j["epochs"] = std::move(epochs);
  if (with_curves) {
    j["regret_curve"] = r.regret_curve;
    j["bits_curve"] = r.bits_curve;
  }
  return j.dump(2);
}

}  // namespace qce
