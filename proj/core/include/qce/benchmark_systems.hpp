#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "qce/control_math.hpp"

namespace qce {

struct BenchmarkSystem {
  std::string name;
  SystemPair sys;
  CostPair cost;
  MatrixXd K0;
  double expected_rho = 0.0;
  double expected_pnorm = 0.0;
};

std::vector<std::string> benchmark_names();

// Directory holding the JSON matrix files: $QCE_DATA_DIR, else the source
// tree, else the install prefix.
std::string data_directory();

// Throws kUnknownSystem, kValidationFailure, kIo.
BenchmarkSystem benchmark_system(std::string_view name);
BenchmarkSystem benchmark_system(std::string_view name,
                                 const std::string& data_dir);

// K_inf(0.9 A, B), checked to stabilize (A, B).
MatrixXd default_k0(const SystemPair& sys, const CostPair& cost);

// FNV-1a 64 over the %.17g rendering of A and B, as "fnv1a64:<hex>".
std::string matrix_hash(const MatrixXd& A, const MatrixXd& B);

}  // namespace qce
