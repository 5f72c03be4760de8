#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qce/control_math.hpp"

namespace qce {

struct SimConfig {
  std::int64_t horizon = 10000;
  std::uint64_t seed = 1;
  double sigma_w = 1.0;

  void validate() const;
};

// N(0,1) draws from mt19937_64 through libstdc++'s normal_distribution
// (Marsaglia polar method). Replays are bit-identical within one build.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double next() { return normal_(engine_); }
  VectorXd next_vector(int dim);

  // Derives a child seed; successive calls give distinct seeds.
  std::uint64_t spawn_seed() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Independent sub-streams derived from one master seed. Process noise and
// exploration noise are separate so controller variants see identical
// disturbances.
struct RngStreams {
  GaussianStream process;
  GaussianStream exploration;
  GaussianStream bootstrap;

  static RngStreams from_master(std::uint64_t seed);
};

std::vector<VectorXd> gaussian_stream(std::uint64_t seed, std::size_t n,
                                      int dim);

// Ax + Bu + w.
VectorXd step(const VectorXd& x, const VectorXd& u, const SystemPair& sys,
              const VectorXd& w);

double stage_cost(const VectorXd& x, const VectorXd& u, const CostPair& cost);

class CostAccumulator {
 public:
  explicit CostAccumulator(double jstar) : jstar_(jstar) {}

  void add(double c);

  double cumulative_cost() const { return cumulative_; }
  const std::vector<double>& per_step_costs() const { return costs_; }
  const std::vector<double>& regret_curve() const { return regret_; }

 private:
  double jstar_;
  double cumulative_ = 0.0;
  std::vector<double> costs_;
  std::vector<double> regret_;
};

// regret[t] = sum_{s<=t} costs[s] - (t+1) * jstar (zero-based t).
std::vector<double> regret_account(std::span<const double> costs,
                                   double jstar);

}  // namespace qce
