#include "qce/benchmark_systems.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qce/errors.hpp"

#ifndef QCE_SOURCE_DATA_DIR
#define QCE_SOURCE_DATA_DIR ""
#endif
#ifndef QCE_INSTALL_DATA_DIR
#define QCE_INSTALL_DATA_DIR ""
#endif

namespace qce {

namespace {

constexpr double kRhoTolerance = 0.005;
constexpr double kPnormRelTolerance = 0.02;
constexpr double kCsafeRelTolerance = 0.05;

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) {
      throw QceError(ErrorCode::kValidationFailure, "ragged matrix in data file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
  }
  return M;
}

void validate(const BenchmarkSystem& b, double expected_csafe) {
  const double rho = spectral_radius(b.sys.A);
  if (std::abs(rho - b.expected_rho) > kRhoTolerance) {
    throw QceError(ErrorCode::kValidationFailure,
                   b.name + ": spectral radius " + std::to_string(rho) +
                       " does not match " + std::to_string(b.expected_rho));
  }
  const RiccatiSolution sol = solve_dare(b.sys, b.cost);
  const double pn = operator_norm(sol.P);
  if (std::abs(pn / b.expected_pnorm - 1.0) > kPnormRelTolerance) {
    throw QceError(ErrorCode::kValidationFailure,
                   b.name + ": ||P|| " + std::to_string(pn) +
                       " does not match " + std::to_string(b.expected_pnorm));
  }
  if (expected_csafe > 0.0 &&
      std::abs(safe_constant_from_norm(pn) / expected_csafe - 1.0) >
          kCsafeRelTolerance) {
    throw QceError(ErrorCode::kValidationFailure,
                   b.name + ": safe constant out of tolerance");
  }
}

BenchmarkSystem from_file(std::string_view name, const std::string& dir) {
  const std::filesystem::path path =
      std::filesystem::path(dir) / (std::string(name) + ".json");
  std::ifstream in(path);
  if (!in) {
    throw QceError(ErrorCode::kIo, "cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw QceError(ErrorCode::kValidationFailure,
                   path.string() + ": " + e.what());
  }
  BenchmarkSystem b;
  b.name = std::string(name);
  b.sys.A = matrix_from_json(j.at("A"));
  b.sys.B = matrix_from_json(j.at("B"));
  b.sys.validate();
  if (matrix_hash(b.sys.A, b.sys.B) != j.at("hash").get<std::string>()) {
    throw QceError(ErrorCode::kValidationFailure,
                   path.string() + ": matrix hash mismatch");
  }
  b.cost = CostPair::identity(b.sys.dx(), b.sys.du());
  b.expected_rho = j.at("expected_rho").get<double>();
  b.expected_pnorm = j.at("expected_pnorm").get<double>();
  validate(b, j.value("expected_csafe", 0.0));
  return b;
}

}  // namespace

std::vector<std::string> benchmark_names() {
  return {"scalar", "double_integrator", "inverted_pendulum", "boeing747"};
}

std::string data_directory() {
  if (const char* env = std::getenv("QCE_DATA_DIR"); env && *env) return env;
  const std::string source = QCE_SOURCE_DATA_DIR;
  if (!source.empty() && std::filesystem::exists(source)) return source;
  return QCE_INSTALL_DATA_DIR;
}

std::string matrix_hash(const MatrixXd& A, const MatrixXd& B) {
  std::string s;
  char buf[64];
  auto render = [&](const MatrixXd& M) {
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      if (i > 0) s += ';';
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        if (c > 0) s += ',';
        std::snprintf(buf, sizeof buf, "%.17g", M(i, c));
        s += buf;
      }
    }
  };
  render(A);
  s += '|';
  render(B);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

MatrixXd default_k0(const SystemPair& sys, const CostPair& cost) {
  const SystemPair prior{0.9 * sys.A, sys.B};
  const MatrixXd K0 = solve_dare(prior, cost).K;
  if (spectral_radius(sys.A + sys.B * K0) >= 1.0) {
    throw QceError(ErrorCode::kValidationFailure,
                   "K0 from the scaled prior model does not stabilize the plant");
  }
  return K0;
}

BenchmarkSystem benchmark_system(std::string_view name) {
  return benchmark_system(name, data_directory());
}

BenchmarkSystem benchmark_system(std::string_view name,
                                 const std::string& data_dir) {
  BenchmarkSystem b;
  if (name == "scalar") {
    b.name = "scalar";
    b.sys = {MatrixXd::Constant(1, 1, 1.1), MatrixXd::Constant(1, 1, 1.0)};
    b.expected_rho = 1.1;
    b.expected_pnorm = 1.77;
    b.cost = CostPair::identity(1, 1);
    validate(b, 0.0);
  } else if (name == "double_integrator") {
    b.name = "double_integrator";
    b.sys.A.resize(2, 2);
    b.sys.A << 1.0, 1.0, 0.0, 1.0;
    b.sys.B.resize(2, 1);
    b.sys.B << 0.5, 1.0;
    b.expected_rho = 1.0;
    b.expected_pnorm = 3.60;
    b.cost = CostPair::identity(2, 1);
    validate(b, 0.0);
  } else if (name == "inverted_pendulum" || name == "boeing747") {
    b = from_file(name, data_dir);
  } else {
    throw QceError(ErrorCode::kUnknownSystem,
                   "unknown benchmark system '" + std::string(name) + "'");
  }
  b.K0 = default_k0(b.sys, b.cost);
  return b;
}

}  // namespace qce
