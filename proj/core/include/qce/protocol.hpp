#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qce/codec.hpp"
#include "qce/control_math.hpp"
#include "qce/ols.hpp"
#include "qce/plant_sim.hpp"

namespace qce {

enum class TriggerVariant { kTheoretical, kBootstrap };
enum class CodecVariant { kLattice, kCoordinate, kUnquantized };

std::string_view to_string(TriggerVariant v);
std::string_view to_string(CodecVariant v);
TriggerVariant parse_trigger_variant(std::string_view s);
CodecVariant parse_codec_variant(std::string_view s);

struct TriggerConfig {
  TriggerVariant variant = TriggerVariant::kBootstrap;
  int n_mc = 50;
  double rho_threshold = 0.99;
  double fallback_multiplier = 5.0;
};

struct EpochSchedule {
  int k = 2;
  std::int64_t tau() const { return std::int64_t{1} << k; }
};

// theta = row-major flattening of [A | B].
VectorXd pack_theta(const MatrixXd& A, const MatrixXd& B);
SystemPair unpack_theta(const VectorXd& theta, int dx, int du);

struct SafeSet {
  VectorXd center;
  double r_safe = 0.0;
  int dx = 0;
  int du = 0;

  // max(||A - A_c||, ||B - B_c||) in operator norm.
  double distance(const VectorXd& theta) const;
  bool contains(const VectorXd& theta, double rel_tol = 1e-9) const;
};

struct ScheduleConstants {
  double sigma_in_sq = 0.0;
  double c_slow = 0.0;
  double c_fast = 0.0;
  double vslow_hat = 0.0;
  double vfast_hat = 0.0;
  double pop_hat = 0.0;
  double c0 = 1.0;

  bool operator==(const ScheduleConstants&) const = default;
};

enum class EstimateTag { kRawOls, kPlantProjected, kSharedDecoded, kControllerProjected };

struct ParamEstimate {
  VectorXd theta;
  EstimateTag tag = EstimateTag::kRawOls;
};

// Lambda >= I and sqrt(Conf) <= 1 / (9 C_safe(Ahat, Bhat)).
bool theoretical_trigger(const OlsResult& ols, const ConfidenceScalar& conf,
                         const CostPair& cost);

// Every posterior sample is stabilized below rho_threshold by K(Ahat, Bhat).
bool bootstrap_trigger(const OlsResult& ols, double sigma_w,
                       const TriggerConfig& cfg, const CostPair& cost,
                       GaussianStream& rng);

// 1 / (3 C_safe) of the model encoded by theta. Throws kRiccatiFailure.
double safe_radius(const VectorXd& theta, int dx, int du, const CostPair& cost);

struct SafeRoundInit {
  ScheduleConstants sched;
  SafeSet safe;
};

// Throws kRiccatiFailure.
SafeRoundInit safe_round_init(const ParamEstimate& decoded, int dx, int du,
                              double r_safe, double rho, double delta,
                              const CostPair& cost, double c0,
                              std::optional<double> sigma_in_override = {});

// Clips the singular values of each block offset to r_safe.
ParamEstimate project_safe(const VectorXd& theta, const SafeSet& safe,
                           EstimateTag tag = EstimateTag::kPlantProjected);

double base_schedule(const ScheduleConstants& sched, std::int64_t tau);
double exploration_variance(double sigma_in_sq, std::int64_t tau);
bool fallback_shield(double x_norm, double presafe_max_norm, double mult);

struct TrialConfig {
  std::int64_t horizon = 10000;
  std::uint64_t seed = 1;
  double sigma_w = 1.0;
  double delta = 1e-4;
  double rho = 0.5;
  double c0 = 1.0;
  CodecVariant codec = CodecVariant::kCoordinate;
  TriggerConfig trigger;
  std::optional<double> sigma_in_override;
  bool project_safe_set = true;
  int coord_index_offset = 0;
  // Scale of the pre-safe excitation g_t; 0 gives a noise-free null run.
  double excitation_scale = 1.0;

  void validate() const;
};

TrialConfig trial_config_from_json(std::string_view text);
std::string trial_config_to_json(const TrialConfig& cfg);

// Variant presets used by the experiments.
TrialConfig practical_qce_config(std::int64_t horizon, std::uint64_t seed);
TrialConfig unquantized_ce_config(std::int64_t horizon, std::uint64_t seed);
TrialConfig theoretical_qce_config(std::int64_t horizon, std::uint64_t seed);

struct ProtocolContext {
  int dx = 0;
  int du = 0;
  CostPair cost;
  TrialConfig cfg;
  std::shared_ptr<const CodebookConfig> codebook;
  WireFormat wire;

  static ProtocolContext make(int dx, int du, const CostPair& cost,
                              const TrialConfig& cfg);
};

// State that plant and controller each hold and must keep identical.
struct SharedState {
  bool safe = false;
  int k_safe = -1;
  VectorXd theta_tilde;
  SafeSet safe_set;
  ScheduleConstants sched;

  bool operator==(const SharedState& o) const;
};

struct EpochRecord {
  int k = 0;
  std::int64_t tau = 0;
  bool safe = false;
  std::uint64_t multiplier = 0;  // 0 when no Track message was sent
  double s_base = 0.0;
  double s = 0.0;
  double delta_norm = 0.0;
  double recon_error = 0.0;  // ||theta_tilde - theta_bar||
  std::size_t bits = 0;
  bool mirror_match = true;
  bool riccati_failure = false;
};

class PlantEndpoint {
 public:
  explicit PlantEndpoint(std::shared_ptr<const ProtocolContext> ctx);

  // Runs the end-of-epoch logic for epoch k on the finished window and
  // returns the messages to send, in order.
  std::vector<UplinkMessage> epoch_end(int k, const OlsResult& ols,
                                       GaussianStream& bootstrap_rng,
                                       EpochRecord& record);

  const SharedState& shared() const { return state_; }

 private:
  std::shared_ptr<const ProtocolContext> ctx_;
  SharedState state_;
};

class ControllerEndpoint {
 public:
  ControllerEndpoint(std::shared_ptr<const ProtocolContext> ctx, MatrixXd K0);

  // Decodes epoch k's messages from the uplink and returns the gain.
  MatrixXd epoch(int k, BitReader& uplink);

  const SharedState& shared() const { return state_; }
  const MatrixXd& gain() const { return gain_; }
  bool last_riccati_failed() const { return last_failed_; }
  const VectorXd& checked_theta() const { return checked_; }

 private:
  std::shared_ptr<const ProtocolContext> ctx_;
  SharedState state_;
  MatrixXd gain_;
  VectorXd checked_;
  bool last_failed_ = false;
};

// Applies one decoded message to the shared state. Both endpoints call this
// so their mirrors evolve through identical floating-point operations.
void apply_message(SharedState& state, const UplinkMessage& msg, int k,
                   const ProtocolContext& ctx);

struct BitsBreakdown {
  std::size_t flags = 0;
  std::size_t init = 0;
  std::size_t multipliers = 0;
  std::size_t indices = 0;
  std::size_t raw = 0;

  std::size_t total() const { return flags + init + multipliers + indices + raw; }
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  double jstar = 0.0;
  std::vector<double> regret_curve;           // index t-1 holds Regret(t)
  std::vector<std::uint32_t> bits_curve;      // index t-1 holds B(t)
  BitsBreakdown breakdown;
  int k_safe = -1;
  std::vector<EpochRecord> epochs;
  int fallback_count = 0;
  int riccati_failures = 0;
  bool mirror_exact = true;
  bool diverged = false;
  std::string uplink_hex;

  std::vector<std::uint64_t> multipliers() const;
  double normalized_regret(std::int64_t t) const;
  std::vector<double> normalized_regret_curve() const;
};

// Closed loop of one trial. Throws only on configuration errors.
TrialResult run_trial(const SystemPair& sys, const CostPair& cost,
                      const MatrixXd& K0, const TrialConfig& cfg);

std::string trial_result_to_json(const TrialResult& res, bool with_curves);

}  // namespace qce
