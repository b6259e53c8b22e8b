#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace breathsim {

enum class ErrorCode {
  kInvalidInput,
  kInvalidBand,
  kInsufficientData,
  kDegenerateInput,
  kConfiguration,
  kSingularState,
  kReducible,
  kNoTransitions,
  kNotApplicable,
  kMustStrip,
  kEmptyPlan,
  kConsistency,
  kInvalidRegion,
  kInvalidCutoff,
  kUnsupportedState,
  kInfiniteDivergence,
  kAlignment,
  kUndefinedAxis,
  kParse,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above. Callers
// that only care about "bad data vs. bug" can catch breathsim::Error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace breathsim
