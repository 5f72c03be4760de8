#pragma once

#include <string>
#include <vector>

namespace qce {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0 means no runtime limit
};

struct VerifyOptions {
  // Reduced sample sizes; results are smoke checks, not acceptance.
  bool quick = false;
  int threads = 0;
};

std::vector<int> criterion_ids();
CriterionResult run_criterion(int id, const VerifyOptions& opts);
std::vector<CriterionResult> run_acceptance(const VerifyOptions& opts,
                                            const std::vector<int>& ids = {});

// "PASS [03] name (1.23 s) detail"
std::string format_result(const CriterionResult& r);

}  // namespace qce
