#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qce/control_math.hpp"
#include "qce/plant_sim.hpp"

namespace qce {

struct OlsResult {
  MatrixXd Ahat;
  MatrixXd Bhat;
  MatrixXd Lambda;  // sum of z z', z = (x, u)
  int n_samples = 0;
  bool singular = true;

  SystemPair system() const { return {Ahat, Bhat}; }
  // [Ahat | Bhat].
  MatrixXd theta_matrix() const;
};

struct ConfidenceScalar {
  double value = 0.0;  // +inf when Lambda is singular
  double lambda_min = 0.0;
  int k = 0;
  double delta = 0.0;
};

// Fits x_{t+1} ~ [A|B] z_t. states holds n+1 consecutive states, inputs the
// n inputs applied between them. Throws kEmptyWindow, kDimensionMismatch.
OlsResult ols_fit(std::span<const VectorXd> states,
                  std::span<const VectorXd> inputs);

ConfidenceScalar confidence(const OlsResult& res, int k, double delta, int d);

// Rows of [A|B] drawn from N(row, sigma_w^2 Lambda^-1). Throws
// kSingularCovariance.
std::vector<SystemPair> sample_ols_posterior(const OlsResult& res,
                                             double sigma_w, int n_samples,
                                             GaussianStream& rng);
std::vector<SystemPair> sample_ols_posterior(const OlsResult& res,
                                             double sigma_w, int n_samples,
                                             std::uint64_t seed);

}  // namespace qce
