#pragma once

// File formats: pneumogram / trajectory / schedule / timeline CSV, model
// JSON and the raw FSEQ frame tensor.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "breathsim/ctmc.hpp"
#include "breathsim/quantizer.hpp"
#include "breathsim/signal.hpp"
#include "breathsim/synth.hpp"

namespace breathsim::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Parses a complete decimal token; throws kParse naming `context`.
double parse_double(const std::string& token, const std::string& context);

/// `time_s,value_uV` rows at a uniform step (1e-6 relative tolerance), or a
/// single value column preceded by `# fs_hz=<value>`.
signal::PneumogramRecord read_pneumogram_csv(std::istream& in);
void write_pneumogram_csv(std::ostream& out, const signal::PneumogramRecord& record,
                          const std::vector<std::string>& comments = {});

/// Header `time_s,rr_hz`; step and origin carried in `#` comments.
signal::RrTrajectory read_trajectory_csv(std::istream& in);
void write_trajectory_csv(std::ostream& out, const signal::RrTrajectory& traj,
                          const std::vector<std::string>& comments = {});

/// Header `state_index,rate_hz,sojourn_s,jump_time_s`, seed in `# seed=`.
ctmc::SojournSchedule read_schedule_csv(std::istream& in);
void write_schedule_csv(std::ostream& out, const ctmc::SojournSchedule& schedule,
                        const quantizer::StateSpace& ss);

struct ModelMeta {
  std::string source;
  std::optional<double> fit_step_s;
  std::optional<std::uint64_t> seed;
};

struct Model {
  quantizer::StateSpace state_space;
  ctmc::GeneratorMatrix generator;
  std::vector<double> pi;
  ModelMeta meta;
};

/// Row-sum tolerance applied to generators read from model files; loose
/// enough for matrices transcribed at six decimals.
inline constexpr double kModelRowSumTolerance = 1e-4;

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

/// Two-column CSV `time_s,<name>` where the second column is a label (0/1)
/// or a score.
struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::string value_name;
};
TimeSeries read_time_series_csv(std::istream& in);

void write_roc_csv(std::ostream& out, const std::vector<double>& thresholds,
                   const std::vector<double>& fpr, const std::vector<double>& tpr);

/// `FSEQ 1` header line, dimension line, then little-endian float32 pixels.
synth::FrameSequence read_fseq(std::istream& in);
void write_fseq(std::ostream& out, const synth::FrameSequence& frames);

}  // namespace breathsim::io
