#pragma once

// Respiratory-rate estimation from a pneumogram: windowed DFT peak picking
// with movement and apnea gating.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace breathsim::signal {

/// Uniformly sampled chest-movement signal, in microvolts.
class PneumogramRecord {
 public:
  PneumogramRecord(std::vector<double> samples, double sample_rate_hz);

  std::span<const double> samples() const { return samples_; }
  double sample_rate() const { return sample_rate_; }
  double sample_interval() const { return 1.0 / sample_rate_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_; }

 private:
  std::vector<double> samples_;
  double sample_rate_;
};

/// Interlaced analysis windows: `length` samples each, consecutive windows
/// sharing `interlace` samples, so they advance by `length - interlace`.
class WindowConfig {
 public:
  WindowConfig(std::size_t length, std::size_t interlace);

  /// Window of `window_s` seconds with the given overlap fraction in [0, 1).
  static WindowConfig from_seconds(double window_s, double overlap, double sample_rate_hz);

  std::size_t length() const { return length_; }
  std::size_t interlace() const { return interlace_; }
  std::size_t step() const { return length_ - interlace_; }

  /// Number of complete windows in a record of `samples` samples.
  std::size_t window_count(std::size_t samples) const;

 private:
  std::size_t length_;
  std::size_t interlace_;
};

struct Band {
  double low_hz;
  double high_hz;
};

struct FundamentalEstimate {
  double frequency_hz = 0.0;
  double amplitude = 0.0;
};

/// Approximate ML fundamental: peak of |P[k]|^2 over the bins inside `band`,
/// after removing the window mean. Ties go to the lowest bin.
FundamentalEstimate estimate_fundamental(std::span<const double> window, double sample_rate_hz,
                                         Band band);

/// True iff any |sample| exceeds eta.
bool detect_movement(std::span<const double> window, double eta);

struct WindowAnalysis {
  FundamentalEstimate estimate;
  bool movement = false;
};

/// Per-window estimates without gating; the shared first pass of the
/// trajectory estimator and the reference apnea detector.
std::vector<WindowAnalysis> analyze_windows(const PneumogramRecord& record, const WindowConfig& cfg,
                                            double eta, Band band);

struct RrOptions {
  double eta_uv = 400.0;
  double r_low_hz = 0.4;
  double r_high_hz = 1.5;
  double r_movement_hz = 15.0;
  /// Unset: 0.1 x median amplitude over non-movement windows.
  std::optional<double> amp_threshold;
};

/// Median-based default amplitude threshold; 0 when every window is movement.
double default_amp_threshold(std::span<const WindowAnalysis> windows);

/// Respiratory-rate trajectory, one value per window. Window j covers
/// samples [j*step, j*step + M) and is time-stamped at its center,
/// origin_time_s + j * window_step_s.
struct RrTrajectory {
  std::vector<double> values;
  double window_step_s = 0.0;
  double origin_time_s = 0.0;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t j) const {
    return origin_time_s + static_cast<double>(j) * window_step_s;
  }
};

RrTrajectory estimate_rr_trajectory(const PneumogramRecord& record, const WindowConfig& cfg,
                                    const RrOptions& options);

}  // namespace breathsim::signal
