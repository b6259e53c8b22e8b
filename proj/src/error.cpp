#include "breathsim/error.hpp"

namespace breathsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kInvalidBand: return "invalid-band";
    case ErrorCode::kInsufficientData: return "insufficient-data";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kSingularState: return "singular-state";
    case ErrorCode::kReducible: return "reducible";
    case ErrorCode::kNoTransitions: return "no-transitions";
    case ErrorCode::kNotApplicable: return "not-applicable";
    case ErrorCode::kMustStrip: return "must-strip";
    case ErrorCode::kEmptyPlan: return "empty-plan";
    case ErrorCode::kConsistency: return "consistency";
    case ErrorCode::kInvalidRegion: return "invalid-region";
    case ErrorCode::kInvalidCutoff: return "invalid-cutoff";
    case ErrorCode::kUnsupportedState: return "unsupported-state";
    case ErrorCode::kInfiniteDivergence: return "infinite-divergence";
    case ErrorCode::kAlignment: return "alignment";
    case ErrorCode::kUndefinedAxis: return "undefined-axis";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace breathsim
