#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qce {

enum class ErrorCode {
  kNonConvergence,
  kDimensionMismatch,
  kUnstable,
  kEmptyWindow,
  kSingularCovariance,
  kZeroOrNegative,
  kInfeasible,
  kOverflow,
  kRiccatiFailure,
  kCChoiceViolated,
  kSingularPhi,
  kRhoOutOfRange,
  kUnknownSystem,
  kValidationFailure,
  kTruncatedStream,
  kInvalidArgument,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above.
class QceError : public std::runtime_error {
 public:
  QceError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qce
