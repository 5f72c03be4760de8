#pragma once

#include <Eigen/Dense>

namespace qce {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SystemPair {
  MatrixXd A;  // dx x dx
  MatrixXd B;  // dx x du

  int dx() const { return static_cast<int>(A.rows()); }
  int du() const { return static_cast<int>(B.cols()); }
  // Number of unknown parameters dx^2 + dx*du.
  int ds() const { return dx() * (dx() + du()); }

  // Throws kDimensionMismatch / kInvalidArgument.
  void validate() const;
};

struct CostPair {
  MatrixXd Rx;
  MatrixXd Ru;

  static CostPair identity(int dx, int du);
  void validate() const;
};

struct RiccatiSolution {
  MatrixXd P;
  MatrixXd K;
  MatrixXd A_cl;
  int iterations = 0;
  double residual = 0.0;
};

struct DareOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  // Relaxation weight of the fixed-point update; 1 is plain value iteration.
  double damping = 1.0;
};

struct LyapunovSolution {
  MatrixXd X;
};

// Stabilizing solution of P = A'PA + Rx - A'PB (Ru + B'PB)^-1 B'PA by value
// iteration from P0 = Rx. Throws kNonConvergence, kDimensionMismatch.
RiccatiSolution solve_dare(const SystemPair& sys, const CostPair& cost,
                           const DareOptions& opts = {});

// K = -(Ru + B'PB)^-1 B'PA.
MatrixXd lqr_gain(const SystemPair& sys, const CostPair& cost,
                  const MatrixXd& P);

// Frobenius norm of the Riccati operator residual at P.
double dare_residual(const SystemPair& sys, const CostPair& cost,
                     const MatrixXd& P);

// X = M'XM + Q. Throws kUnstable when rho(M) >= 1.
LyapunovSolution solve_dlyap(const MatrixXd& M, const MatrixXd& Q);

double spectral_radius(const MatrixXd& M);
double operator_norm(const MatrixXd& M);
double min_eigenvalue(const MatrixXd& symmetric);
double max_eigenvalue(const MatrixXd& symmetric);

// 54 * ||P||^5.
double safe_constant_from_norm(double p_op);
double safe_constant(const SystemPair& sys, const CostPair& cost);

// max_w sigma_max((e^{iw} I - M)^-1) on w_j = 2 pi j / grid_points.
double hinf_diagnostic(const MatrixXd& M, int grid_points);

// sigma_w^2 Tr(dlyap[A+BK, Rx + K'RuK]); +inf if A+BK is unstable.
double stationary_cost(const SystemPair& sys, const CostPair& cost,
                       const MatrixXd& K, double sigma_w);

// Symmetric square root and inverse square root via eigendecomposition.
MatrixXd sym_sqrt(const MatrixXd& S, double floor = 1e-12);
MatrixXd sym_inv_sqrt(const MatrixXd& S, double floor = 1e-12);

}  // namespace qce
