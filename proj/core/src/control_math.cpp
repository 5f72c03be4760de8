#include "qce/control_math.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "qce/errors.hpp"

namespace qce {

namespace {

constexpr int kKroneckerMaxDim = 8;
constexpr double kDivergenceNorm = 1e14;

bool all_finite(const MatrixXd& M) { return M.allFinite(); }

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

void check_symmetric_pd(const MatrixXd& M, const char* name) {
  if (M.rows() != M.cols()) {
    throw QceError(ErrorCode::kDimensionMismatch,
                   std::string(name) + " must be square");
  }
  if (!all_finite(M)) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string(name) + " has non-finite entries");
  }
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string(name) + " is not symmetric");
  }
  if (min_eigenvalue(M) <= 0.0) {
    throw QceError(ErrorCode::kInvalidArgument,
                   std::string(name) + " is not positive definite");
  }
}

MatrixXd riccati_map(const SystemPair& sys, const CostPair& cost,
                     const MatrixXd& P) {
  const MatrixXd& A = sys.A;
  const MatrixXd& B = sys.B;
  const MatrixXd PA = P * A;
  const MatrixXd PB = P * B;
  const MatrixXd S = cost.Ru + B.transpose() * PB;
  const MatrixXd G = S.ldlt().solve(B.transpose() * PA);
  return symmetrize(A.transpose() * PA + cost.Rx - (A.transpose() * PB) * G);
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnstable: return "Unstable";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kZeroOrNegative: return "ZeroOrNegative";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kRiccatiFailure: return "RiccatiFailure";
    case ErrorCode::kCChoiceViolated: return "CChoiceViolated";
    case ErrorCode::kSingularPhi: return "SingularPhi";
    case ErrorCode::kRhoOutOfRange: return "RhoOutOfRange";
    case ErrorCode::kUnknownSystem: return "UnknownSystem";
    case ErrorCode::kValidationFailure: return "ValidationFailure";
    case ErrorCode::kTruncatedStream: return "TruncatedStream";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

void SystemPair::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw QceError(ErrorCode::kDimensionMismatch, "A must be square, non-empty");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw QceError(ErrorCode::kDimensionMismatch,
                   "B must have dx rows and at least one column");
  }
  if (!all_finite(A) || !all_finite(B)) {
    throw QceError(ErrorCode::kInvalidArgument, "system has non-finite entries");
  }
}

CostPair CostPair::identity(int dx, int du) {
  return {MatrixXd::Identity(dx, dx), MatrixXd::Identity(du, du)};
}

void CostPair::validate() const {
  check_symmetric_pd(Rx, "Rx");
  check_symmetric_pd(Ru, "Ru");
}

MatrixXd lqr_gain(const SystemPair& sys, const CostPair& cost,
                  const MatrixXd& P) {
  const MatrixXd S = cost.Ru + sys.B.transpose() * P * sys.B;
  return -S.ldlt().solve(sys.B.transpose() * P * sys.A);
}

double dare_residual(const SystemPair& sys, const CostPair& cost,
                     const MatrixXd& P) {
  return (P - riccati_map(sys, cost, P)).norm();
}

RiccatiSolution solve_dare(const SystemPair& sys, const CostPair& cost,
                           const DareOptions& opts) {
  sys.validate();
  if (cost.Rx.rows() != sys.dx() || cost.Rx.cols() != sys.dx() ||
      cost.Ru.rows() != sys.du() || cost.Ru.cols() != sys.du()) {
    throw QceError(ErrorCode::kDimensionMismatch,
                   "cost dimensions do not match the system");
  }
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw QceError(ErrorCode::kInvalidArgument, "damping must lie in (0, 1]");
  }

  MatrixXd P = cost.Rx;
  for (int it = 1; it <= opts.max_iter; ++it) {
    MatrixXd next = riccati_map(sys, cost, P);
    if (opts.damping != 1.0) {
      next = (1.0 - opts.damping) * P + opts.damping * next;
    }
    if (!all_finite(next) || next.norm() > kDivergenceNorm) {
      throw QceError(ErrorCode::kNonConvergence,
                     "Riccati iterate diverged after " + std::to_string(it) +
                         " iterations");
    }
    const double step = (next - P).norm();
    const double scale = 1.0 + P.norm();
    P = std::move(next);
    if (step <= opts.tol * scale) {
      RiccatiSolution sol;
      sol.P = P;
      sol.K = lqr_gain(sys, cost, P);
      sol.A_cl = sys.A + sys.B * sol.K;
      sol.iterations = it;
      sol.residual = dare_residual(sys, cost, P);
      if (spectral_radius(sol.A_cl) >= 1.0) {
        throw QceError(ErrorCode::kNonConvergence,
                       "fixed point is not stabilizing");
      }
      return sol;
    }
  }
  throw QceError(ErrorCode::kNonConvergence,
                 "no convergence within " + std::to_string(opts.max_iter) +
                     " iterations");
}

LyapunovSolution solve_dlyap(const MatrixXd& M, const MatrixXd& Q) {
  if (M.rows() != M.cols() || Q.rows() != M.rows() || Q.cols() != M.cols()) {
    throw QceError(ErrorCode::kDimensionMismatch, "dlyap dimensions");
  }
  if (spectral_radius(M) >= 1.0) {
    throw QceError(ErrorCode::kUnstable, "dlyap requires rho(M) < 1");
  }
  const Eigen::Index n = M.rows();
  LyapunovSolution out;
  if (n <= kKroneckerMaxDim) {
    const MatrixXd Mt = M.transpose();
    const MatrixXd L = MatrixXd::Identity(n * n, n * n) -
                       Eigen::kroneckerProduct(Mt, Mt).eval();
    const VectorXd q = Eigen::Map<const VectorXd>(Q.data(), n * n);
    const VectorXd x = L.fullPivLu().solve(q);
    out.X = symmetrize(Eigen::Map<const MatrixXd>(x.data(), n, n));
    return out;
  }
  // Squared Smith iteration: X <- X + Ak' X Ak, Ak <- Ak^2.
  MatrixXd X = Q;
  MatrixXd Ak = M;
  for (int i = 0; i < 64; ++i) {
    const MatrixXd inc = Ak.transpose() * X * Ak;
    X += inc;
    Ak = Ak * Ak;
    if (inc.norm() <= 1e-16 * (1.0 + X.norm())) break;
  }
  out.X = symmetrize(X);
  return out;
}

double spectral_radius(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  if (M.rows() == 1) return std::abs(M(0, 0));
  Eigen::EigenSolver<MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) {
    return std::numeric_limits<double>::infinity();
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double operator_norm(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  if (M.rows() == 1 || M.cols() == 1) return M.norm();
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

double min_eigenvalue(const MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric,
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric,
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues()(symmetric.rows() - 1);
}

double safe_constant_from_norm(double p_op) { return 54.0 * std::pow(p_op, 5); }

double safe_constant(const SystemPair& sys, const CostPair& cost) {
  const RiccatiSolution sol = solve_dare(sys, cost);
  return safe_constant_from_norm(operator_norm(sol.P));
}

double hinf_diagnostic(const MatrixXd& M, int grid_points) {
  if (grid_points < 64) {
    throw QceError(ErrorCode::kInvalidArgument, "grid_points must be >= 64");
  }
  if (M.rows() != M.cols()) {
    throw QceError(ErrorCode::kDimensionMismatch, "M must be square");
  }
  if (spectral_radius(M) >= 1.0) {
    throw QceError(ErrorCode::kUnstable, "H-infinity norm needs rho(M) < 1");
  }
  using Cplx = std::complex<double>;
  const Eigen::Index n = M.rows();
  const Eigen::MatrixXcd Mc = M.cast<Cplx>();
  double worst = 0.0;
  for (int j = 0; j < grid_points; ++j) {
    const double w = 2.0 * std::numbers::pi * j / grid_points;
    const Cplx z = std::polar(1.0, w);
    const Eigen::MatrixXcd R = z * Eigen::MatrixXcd::Identity(n, n) - Mc;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R);
    const double smin = svd.singularValues()(n - 1);
    worst = std::max(worst, 1.0 / smin);
  }
  return worst;
}

double stationary_cost(const SystemPair& sys, const CostPair& cost,
                       const MatrixXd& K, double sigma_w) {
  const MatrixXd Acl = sys.A + sys.B * K;
  if (spectral_radius(Acl) >= 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  const MatrixXd Q = cost.Rx + K.transpose() * cost.Ru * K;
  return sigma_w * sigma_w * solve_dlyap(Acl, Q).X.trace();
}

MatrixXd sym_sqrt(const MatrixXd& S, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(S));
  if (es.eigenvalues().minCoeff() < floor) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "matrix square root needs a positive definite argument");
  }
  const MatrixXd& V = es.eigenvectors();
  return V * es.eigenvalues().cwiseSqrt().asDiagonal() * V.transpose();
}

MatrixXd sym_inv_sqrt(const MatrixXd& S, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(S));
  if (es.eigenvalues().minCoeff() < floor) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "inverse square root needs a positive definite argument");
  }
  const MatrixXd& V = es.eigenvectors();
  return V * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         V.transpose();
}

}  // namespace qce
