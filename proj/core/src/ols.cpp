#include "qce/ols.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "qce/errors.hpp"

namespace qce {

namespace {

constexpr double kPinvCutoff = 1e-10;

bool lambda_singular(const VectorXd& evals) {
  const double lmax = evals.maxCoeff();
  return lmax <= 0.0 || evals.minCoeff() <= kPinvCutoff * lmax;
}

}  // namespace

MatrixXd OlsResult::theta_matrix() const {
  MatrixXd T(Ahat.rows(), Ahat.cols() + Bhat.cols());
  T << Ahat, Bhat;
  return T;
}

OlsResult ols_fit(std::span<const VectorXd> states,
                  std::span<const VectorXd> inputs) {
  if (inputs.empty()) {
    throw QceError(ErrorCode::kEmptyWindow, "no samples in the OLS window");
  }
  if (states.size() != inputs.size() + 1) {
    throw QceError(ErrorCode::kDimensionMismatch,
                   "ols_fit expects one more state than inputs");
  }
  const Eigen::Index dx = states[0].size();
  const Eigen::Index du = inputs[0].size();
  const Eigen::Index d = dx + du;

  MatrixXd Lambda = MatrixXd::Zero(d, d);
  MatrixXd cross = MatrixXd::Zero(dx, d);
  VectorXd z(d);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (states[t].size() != dx || states[t + 1].size() != dx ||
        inputs[t].size() != du) {
      throw QceError(ErrorCode::kDimensionMismatch, "ragged OLS samples");
    }
    z << states[t], inputs[t];
    Lambda.selfadjointView<Eigen::Lower>().rankUpdate(z);
    cross.noalias() += states[t + 1] * z.transpose();
  }
  Lambda = Lambda.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Lambda);
  const VectorXd& ev = es.eigenvalues();
  const double lmax = ev.maxCoeff();
  VectorXd inv = VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (lmax > 0.0 && ev(i) > kPinvCutoff * lmax) inv(i) = 1.0 / ev(i);
  }
  const MatrixXd pinv =
      es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  const MatrixXd theta = cross * pinv;

  OlsResult res;
  res.Ahat = theta.leftCols(dx);
  res.Bhat = theta.rightCols(du);
  res.Lambda = Lambda;
  res.n_samples = static_cast<int>(inputs.size());
  res.singular = lambda_singular(ev);
  return res;
}

ConfidenceScalar confidence(const OlsResult& res, int k, double delta, int d) {
  if (k < 1 || !(delta > 0.0 && delta < 1.0)) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "confidence needs k >= 1 and delta in (0,1)");
  }
  ConfidenceScalar out;
  out.k = k;
  out.delta = delta;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(res.Lambda,
                                             Eigen::EigenvaluesOnly);
  const VectorXd& ev = es.eigenvalues();
  out.lambda_min = ev.minCoeff();
  if (lambda_singular(ev)) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  double log2_det3 = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    log2_det3 += std::log2(3.0 * ev(i));
  }
  const double kk = static_cast<double>(k);
  const double bracket = d * std::log2(5.0) + std::log2(4.0 * kk * kk) +
                         log2_det3 - std::log2(delta);
  out.value = 6.0 / out.lambda_min * bracket;
  return out;
}

std::vector<SystemPair> sample_ols_posterior(const OlsResult& res,
                                             double sigma_w, int n_samples,
                                             GaussianStream& rng) {
  if (res.singular) {
    throw QceError(ErrorCode::kSingularCovariance,
                   "posterior needs an invertible Lambda");
  }
  const MatrixXd center = res.theta_matrix();
  const Eigen::Index dx = res.Ahat.rows();
  const Eigen::Index d = center.cols();
  const MatrixXd cov = res.Lambda.inverse();
  Eigen::LLT<MatrixXd> llt(0.5 * (cov + cov.transpose()));
  if (llt.info() != Eigen::Success) {
    throw QceError(ErrorCode::kSingularCovariance,
                   "Lambda^-1 is not positive definite");
  }
  const MatrixXd L = llt.matrixL();

  std::vector<SystemPair> out;
  out.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    MatrixXd theta = center;
    for (Eigen::Index i = 0; i < dx; ++i) {
      const VectorXd g = rng.next_vector(static_cast<int>(d));
      theta.row(i) += sigma_w * (L * g).transpose();
    }
    out.push_back({theta.leftCols(dx), theta.rightCols(d - dx)});
  }
  return out;
}

std::vector<SystemPair> sample_ols_posterior(const OlsResult& res,
                                             double sigma_w, int n_samples,
                                             std::uint64_t seed) {
  GaussianStream rng(seed);
  return sample_ols_posterior(res, sigma_w, n_samples, rng);
}

}  // namespace qce
