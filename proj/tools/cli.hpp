#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace breathsim::cli {

/// Experiment constants shared by every subcommand. Defaults: 10 s windows
/// with 95% overlap, eta = 400 uV, apnea rate 0.1 Hz, newborn rate bounds.
struct PipelineConfig {
  double window_s = 10.0;
  double overlap = 0.95;
  double r_low_hz = 0.4;
  double r_high_hz = 1.5;
  double r_movement_hz = 15.0;
  double eta_uv = 400.0;
  double apnea_rate_hz = 0.1;
  std::optional<double> amp_threshold;
  std::size_t n_states = 5;
  bool apnea = true;
  bool movement = true;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  /// Overlays the keys present in `j` onto this config.
  void merge_json(const nlohmann::json& j);
  /// Throws breathsim::Error(kConfiguration) on unordered or non-positive bounds.
  void validate() const;
};

/// Runs one command line (args[0] is the program name). Returns 0 on
/// success, 2 on usage or data errors, 1 on internal errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace breathsim::cli
