#include "qce/converse.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "qce/errors.hpp"
#include "qce/plant_sim.hpp"

namespace qce {

namespace {

constexpr double kSqrtFloor = 1e-12;
constexpr double kPopInflation = 1.0835;

void mean_se(const std::vector<double>& v, double& mean, double& se) {
  const double n = static_cast<double>(v.size());
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
}

}  // namespace

double default_c(double r, const CostPair& cost) {
  return 1.01 * (1.0 + r * r * max_eigenvalue(cost.Ru) / min_eigenvalue(cost.Rx));
}

HardInstance build_hard_instance(const MatrixXd& K, const MatrixXd& Rx,
                                 const MatrixXd& Ru, double sigma_w, double c) {
  CostPair{Rx, Ru}.validate();
  if (K.rows() != Ru.rows() || K.cols() != Rx.rows()) {
    throw QceError(ErrorCode::kDimensionMismatch, "K must be du x dx");
  }
  const double threshold =
      1.0 + K.squaredNorm() * max_eigenvalue(Ru) / min_eigenvalue(Rx);
  if (!(c > threshold)) {
    throw QceError(ErrorCode::kCChoiceViolated,
                   "c must exceed 1 + ||K||_F^2 lmax(Ru)/lmin(Rx) = " +
                       std::to_string(threshold));
  }
  HardInstance h;
  h.K = K;
  h.c = c;
  h.Rx = Rx;
  h.Ru = Ru;
  h.sigma_w = sigma_w;
  h.P = c * Rx;
  h.M_K = (c - 1.0) * Rx - K.transpose() * Ru * K;
  h.M_K = 0.5 * (h.M_K + h.M_K.transpose());
  if (min_eigenvalue(h.M_K) < kSqrtFloor) {
    throw QceError(ErrorCode::kSingularPhi, "M_K is not positive definite");
  }
  h.Phi_K = sym_inv_sqrt(h.P, kSqrtFloor) * sym_sqrt(h.M_K, kSqrtFloor);
  const MatrixXd phi_inv_t = h.Phi_K.transpose().inverse();
  h.B_K = -h.P.inverse() * phi_inv_t * K.transpose() * Ru;
  h.A_K = h.Phi_K - h.B_K * K;
  h.S_K = Ru + h.B_K.transpose() * h.P * h.B_K;
  h.J_P = sigma_w * sigma_w * h.P.trace();
  return h;
}

double InstanceInvariants::worst() const {
  return std::max({closed_loop_gap, phi_gap, cross_gap, lyapunov_gap});
}

InstanceInvariants check_invariants(const HardInstance& h) {
  InstanceInvariants inv;
  inv.closed_loop_gap = (h.A_K + h.B_K * h.K - h.Phi_K).norm();
  const MatrixXd PhiPPhi = h.Phi_K.transpose() * h.P * h.Phi_K;
  inv.phi_gap = (PhiPPhi - h.M_K).norm();
  inv.cross_gap = (h.B_K.transpose() * h.P * h.Phi_K + h.Ru * h.K).norm();
  inv.lyapunov_gap =
      (h.Rx + h.K.transpose() * h.Ru * h.K + PhiPPhi - h.P).norm();
  inv.phi_radius = spectral_radius(h.Phi_K);
  return inv;
}

FixedPointCheck verify_fixed_point(const HardInstance& inst, const CostPair& cost) {
  RiccatiSolution sol;
  try {
    sol = solve_dare(inst.system(), cost);
  } catch (const QceError& e) {
    throw QceError(ErrorCode::kRiccatiFailure, e.what());
  }
  FixedPointCheck out;
  out.gain_gap = (sol.K - inst.K).norm();
  const double J = inst.sigma_w * inst.sigma_w * sol.P.trace();
  out.cost_rel_error = inst.J_P > 0.0 ? std::abs(J - inst.J_P) / inst.J_P
                                      : std::abs(J - inst.J_P);
  return out;
}

double bellman_residual(const HardInstance& h, const VectorXd& x,
                        const VectorXd& u) {
  const VectorXd next = h.A_K * x + h.B_K * u;
  const double lhs = x.dot(h.Rx * x) + u.dot(h.Ru * u) + h.value(next) +
                     h.sigma_w * h.sigma_w * h.P.trace() - h.value(x) - h.J_P;
  const VectorXd e = u - h.K * x;
  return lhs - e.dot(h.S_K * e);
}

RegretIdentityReport regret_identity_check(const HardInstance& h,
                                           const Policy& policy,
                                           std::int64_t T, int n_trials,
                                           std::uint64_t seed) {
  const int dx = static_cast<int>(h.P.rows());
  GaussianStream noise(seed);
  std::vector<double> lhs(n_trials), rhs(n_trials);
  RegretIdentityReport rep;
  rep.n_trials = n_trials;
  rep.horizon = T;
  for (int n = 0; n < n_trials; ++n) {
    VectorXd x = VectorXd::Zero(dx);
    double excess = 0.0;
    double cost = 0.0;
    for (std::int64_t t = 0; t < T; ++t) {
      const VectorXd u = policy(x);
      const VectorXd e = u - h.K * x;
      excess += e.dot(h.S_K * e);
      cost += x.dot(h.Rx * x) + u.dot(h.Ru * u);
      x = h.A_K * x + h.B_K * u + h.sigma_w * noise.next_vector(dx);
    }
    lhs[n] = excess;
    rhs[n] = cost - static_cast<double>(T) * h.J_P + h.value(x);
    rep.max_pathwise_gap =
        std::max(rep.max_pathwise_gap, std::abs(lhs[n] - rhs[n]));
  }
  mean_se(lhs, rep.excess_mean, rep.excess_se);
  mean_se(rhs, rep.rhs_mean, rep.rhs_se);
  rep.combined_se = std::sqrt(rep.excess_se * rep.excess_se + rep.rhs_se * rep.rhs_se);
  const double diff = std::abs(rep.excess_mean - rep.rhs_mean);
  if (rep.combined_se > 0.0) {
    rep.z_score = diff / rep.combined_se;
    rep.agree = rep.z_score <= 3.0;
  } else {
    rep.z_score = 0.0;
    rep.agree = diff <= 1e-9 * (1.0 + std::abs(rep.excess_mean));
  }
  return rep;
}

BoundsReport bits_lower_bound(double alpha, std::int64_t T, int dx, int du,
                              double r, const CostPair& cost, double sigma_w,
                              double C1, double c) {
  if (!(alpha >= 0.5 && alpha < 1.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "alpha must lie in [1/2, 1)");
  }
  if (T < 4) throw QceError(ErrorCode::kInvalidArgument, "T must be >= 4");
  if (dx < 1 || du < 1 || !(r > 0.0) || !(sigma_w > 0.0)) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "dx, du, r and sigma_w must be positive");
  }
  cost.validate();
  if (cost.Rx.rows() != dx || cost.Ru.rows() != du) {
    throw QceError(ErrorCode::kDimensionMismatch, "cost dimensions");
  }
  const double threshold =
      1.0 + r * r * max_eigenvalue(cost.Ru) / min_eigenvalue(cost.Rx);
  if (!(c > threshold)) {
    throw QceError(ErrorCode::kCChoiceViolated,
                   "c must exceed 1 + r^2 lmax(Ru)/lmin(Rx)");
  }
  BoundsReport b;
  b.alpha = alpha;
  b.T = T;
  b.dx = dx;
  b.du = du;
  b.r = r;
  b.sigma_w = sigma_w;
  b.C1 = C1;
  b.c = c;
  b.c0 = sigma_w * sigma_w * min_eigenvalue(cost.Ru);
  b.J_P = sigma_w * sigma_w * c * cost.Rx.trace();
  b.C_est = 5.0 * c / b.c0 * (C1 + c * b.J_P);
  const double p = static_cast<double>(du * dx);
  b.constant_C = 1.0 +
                 p / 2.0 * std::log2(2.0 * std::numbers::pi * std::numbers::e * b.C_est / p) -
                 p * std::log2(2.0 * r / std::sqrt(p));
  b.coefficient = p * (1.0 - alpha) / 2.0;
  b.bits_lower = b.coefficient * std::log2(static_cast<double>(T)) - b.constant_C;
  return b;
}

InflationFactors inflation_factors(double rho, double C0) {
  if (!(rho > 0.0 && rho < std::sqrt(0.5))) {
    throw QceError(ErrorCode::kRhoOutOfRange, "rho must lie in (0, 1/sqrt 2)");
  }
  InflationFactors f;
  const double s2 = std::sqrt(2.0);
  const double q = std::pow(2.0, 0.25);
  f.beta = rho * s2;
  f.C_rho = 1.0 / (1.0 - f.beta);
  f.m_inf = (2.0 - f.beta) / (1.0 - f.beta);
  f.M_rho = static_cast<int>(std::ceil(f.m_inf));
  f.b_rho = 2 * static_cast<int>(std::floor(std::log2(double(f.M_rho)))) + 1;
  const double slow = (1.0 + q) / (1.0 - rho * q);
  const double fast = (1.0 + s2) / (1.0 - rho * s2);
  const double base = rho * rho * f.C_rho * f.C_rho * C0;
  f.Q_slow = base * slow * slow * std::pow(kPopInflation, 4);
  f.Q_fast = base * fast * fast * std::pow(kPopInflation, 6);
  return f;
}

CommBudget comm_budget_bound(int ds, double rho, std::int64_t T) {
  if (T < 2) throw QceError(ErrorCode::kInvalidArgument, "T must be >= 2");
  const InflationFactors f = inflation_factors(rho, 1.0);
  CommBudget b;
  b.per_doubling = ds * std::log2(1.0 + 2.0 / rho) + f.b_rho;
  b.horizon_bits = b.per_doubling * std::log2(static_cast<double>(T));
  b.symbolic_overhead =
      "initialization message, pre-safe flags and the multiplier transient "
      "are one-time costs whose scale depends on unspecified analysis "
      "constants; not evaluated";
  return b;
}

std::string bounds_report_to_json(const BoundsReport& r) {
  nlohmann::json j;
  j["alpha"] = r.alpha;
  j["T"] = r.T;
  j["dx"] = r.dx;
  j["du"] = r.du;
  j["r"] = r.r;
  j["sigma_w"] = r.sigma_w;
  j["C1"] = r.C1;
  j["c"] = r.c;
  j["c0"] = r.c0;
  j["J_P"] = r.J_P;
  j["C_est"] = r.C_est;
  j["constant_C"] = r.constant_C;
  j["coefficient"] = r.coefficient;
  j["bits_lower"] = r.bits_lower;
  return j.dump(2);
}

}  // namespace qce
