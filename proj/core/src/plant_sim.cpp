#include "qce/plant_sim.hpp"

#include <cmath>

#include "qce/errors.hpp"

namespace qce {

void SimConfig::validate() const {
  if (horizon < 4) {
    throw QceError(ErrorCode::kInvalidArgument, "horizon must be >= 4");
  }
  if (!std::isfinite(sigma_w) || sigma_w <= 0.0) {
    throw QceError(ErrorCode::kInvalidArgument,
                   "sigma_w must be finite and positive");
  }
}

VectorXd GaussianStream::next_vector(int dim) {
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = next();
  return v;
}

RngStreams RngStreams::from_master(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0x51ceu};
  std::uint64_t words[6];
  std::uint32_t raw[6];
  seq.generate(raw, raw + 6);
  for (int i = 0; i < 6; ++i) words[i] = raw[i];
  return {GaussianStream((words[0] << 32) | words[1]),
          GaussianStream((words[2] << 32) | words[3]),
          GaussianStream((words[4] << 32) | words[5])};
}

std::vector<VectorXd> gaussian_stream(std::uint64_t seed, std::size_t n,
                                      int dim) {
  GaussianStream g(seed);
  std::vector<VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(g.next_vector(dim));
  return out;
}

VectorXd step(const VectorXd& x, const VectorXd& u, const SystemPair& sys,
              const VectorXd& w) {
  if (x.size() != sys.dx() || w.size() != sys.dx() || u.size() != sys.du()) {
    throw QceError(ErrorCode::kDimensionMismatch, "step dimensions");
  }
  return sys.A * x + sys.B * u + w;
}

double stage_cost(const VectorXd& x, const VectorXd& u, const CostPair& cost) {
  return x.dot(cost.Rx * x) + u.dot(cost.Ru * u);
}

void CostAccumulator::add(double c) {
  cumulative_ += c;
  costs_.push_back(c);
  regret_.push_back(cumulative_ - static_cast<double>(costs_.size()) * jstar_);
}

std::vector<double> regret_account(std::span<const double> costs,
                                   double jstar) {
  CostAccumulator acc(jstar);
  for (double c : costs) acc.add(c);
  return acc.regret_curve();
}

}  // namespace qce
