#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "qce/control_math.hpp"

namespace qce {

struct HardInstance {
  MatrixXd K;
  double c = 0.0;
  MatrixXd Rx;
  MatrixXd Ru;
  double sigma_w = 1.0;
  MatrixXd P;
  MatrixXd M_K;
  MatrixXd Phi_K;
  MatrixXd A_K;
  MatrixXd B_K;
  MatrixXd S_K;
  double J_P = 0.0;

  SystemPair system() const { return {A_K, B_K}; }
  CostPair cost() const { return {Rx, Ru}; }
  // V(x) = x'Px.
  double value(const VectorXd& x) const { return x.dot(P * x); }
};

// 1.01 * (1 + r^2 lmax(Ru) / lmin(Rx)).
double default_c(double r, const CostPair& cost);

// Throws kCChoiceViolated, kSingularPhi.
HardInstance build_hard_instance(const MatrixXd& K, const MatrixXd& Rx,
                                 const MatrixXd& Ru, double sigma_w, double c);

struct InstanceInvariants {
  double closed_loop_gap = 0.0;  // ||A_K + B_K K - Phi_K||_F
  double phi_gap = 0.0;          // ||Phi' P Phi - M_K||_F
  double cross_gap = 0.0;        // ||B_K' P Phi_K + Ru K||_F
  double lyapunov_gap = 0.0;     // ||Rx + K'RuK + Phi' P Phi - P||_F
  double phi_radius = 0.0;       // rho(Phi_K)

  double worst() const;
};

InstanceInvariants check_invariants(const HardInstance& inst);

struct FixedPointCheck {
  double gain_gap = 0.0;        // ||K_inf(A_K, B_K) - K||_F
  double cost_rel_error = 0.0;  // |sigma^2 Tr P_inf - J_P| / J_P
};

// Throws kRiccatiFailure.
FixedPointCheck verify_fixed_point(const HardInstance& inst, const CostPair& cost);

// Bellman one-step defect minus the excess (u-Kx)'S(u-Kx).
double bellman_residual(const HardInstance& inst, const VectorXd& x,
                        const VectorXd& u);

using Policy = std::function<VectorXd(const VectorXd&)>;

struct RegretIdentityReport {
  int n_trials = 0;
  std::int64_t horizon = 0;
  double excess_mean = 0.0;  // sum of (u-Kx)'S(u-Kx)
  double excess_se = 0.0;
  double rhs_mean = 0.0;  // Regret_T + V(x_{T+1})
  double rhs_se = 0.0;
  double combined_se = 0.0;
  double z_score = 0.0;
  double max_pathwise_gap = 0.0;  // only meaningful when sigma_w = 0
  bool agree = false;
};

RegretIdentityReport regret_identity_check(const HardInstance& inst,
                                           const Policy& policy,
                                           std::int64_t T, int n_trials,
                                           std::uint64_t seed);

struct BoundsReport {
  double alpha = 0.5;
  std::int64_t T = 0;
  int dx = 0;
  int du = 0;
  double r = 0.0;
  double sigma_w = 1.0;
  double C1 = 0.0;
  double c = 0.0;
  double c0 = 0.0;
  double J_P = 0.0;
  double C_est = 0.0;
  double constant_C = 0.0;
  double coefficient = 0.0;
  double bits_lower = 0.0;
};

BoundsReport bits_lower_bound(double alpha, std::int64_t T, int dx, int du,
                              double r, const CostPair& cost, double sigma_w,
                              double C1, double c);

struct InflationFactors {
  double C_rho = 0.0;
  double beta = 0.0;
  double m_inf = 0.0;
  int M_rho = 0;
  int b_rho = 0;
  double Q_slow = 0.0;
  double Q_fast = 0.0;
};

// Throws kRhoOutOfRange.
InflationFactors inflation_factors(double rho, double C0);

struct CommBudget {
  double horizon_bits = 0.0;
  double per_doubling = 0.0;  // bracket added by each doubling of T
  std::string symbolic_overhead;
};

CommBudget comm_budget_bound(int ds, double rho, std::int64_t T);

std::string bounds_report_to_json(const BoundsReport& r);

}  // namespace qce
