#pragma once

// Synthetic artifacts driven by a sojourn schedule: a breathing motion
// signal, or a temporally warped copy of a recorded frame sequence.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "breathsim/ctmc.hpp"
#include "breathsim/quantizer.hpp"
#include "breathsim/signal.hpp"

namespace breathsim::synth {

/// Luminance frames in [0, 1], frame-major and row-major within a frame.
class FrameSequence {
 public:
  FrameSequence(std::size_t frames, std::size_t height, std::size_t width, double fps,
                std::vector<float> pixels);

  std::size_t frames() const { return frames_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels_per_frame() const { return height_ * width_; }
  double fps() const { return fps_; }

  std::span<const float> data() const { return pixels_; }
  std::span<const float> frame(std::size_t f) const {
    return std::span<const float>(pixels_).subspan(f * pixels_per_frame(), pixels_per_frame());
  }
  float at(std::size_t f, std::size_t row, std::size_t col) const {
    return pixels_[f * pixels_per_frame() + row * width_ + col];
  }

 private:
  std::size_t frames_;
  std::size_t height_;
  std::size_t width_;
  double fps_;
  std::vector<float> pixels_;
};

struct Region {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Rates relative to the source video rate. The apnea rate 0 is replaced by
/// `apnea_rate_hz` (0 < apnea_rate_hz < R_L). The movement state must have
/// been stripped.
std::vector<double> normalize_rates(const quantizer::StateSpace& ss, double video_rate_hz,
                                    double apnea_rate_hz);

/// Rescales normalized rates so the state with the smallest exit rate (the
/// longest mean sojourn) plays at native speed.
std::vector<double> apply_cv_scaling(std::span<const double> normalized,
                                     const ctmc::GeneratorMatrix& generator);

struct WarpRecord {
  std::size_t state = 0;
  double normalized_rate = 1.0;
  /// Output frames for this sojourn.
  std::size_t frame_budget = 0;
  /// round(jump time * fps), before wrapping into the source.
  std::size_t jump_frame = 0;
  /// First source frame of the block.
  std::size_t source_start = 0;
  /// Source frames consumed by the block.
  std::size_t block_length = 0;
};

struct WarpPlan {
  std::vector<WarpRecord> records;
  double fps = 0.0;
  std::size_t source_frames = 0;

  std::size_t output_frames() const;
};

WarpPlan plan_warp(const ctmc::SojournSchedule& schedule, std::span<const double> normalized,
                   double fps, std::size_t source_frames);

struct NoiseOptions {
  bool enabled = false;
  /// Static background used to estimate the camera noise variance.
  Region region;
};

/// Resamples each pixel's time series block by block with a natural cubic
/// spline; stretched blocks optionally receive high-pass compensation noise.
FrameSequence warp_frames(const FrameSequence& src, const WarpPlan& plan, const NoiseOptions& noise,
                          std::uint64_t seed);

/// Mean over the region of each pixel's unbiased temporal variance.
double estimate_noise_variance(const FrameSequence& src, const Region& region);

/// Gaussian white noise of the given variance through a second-order
/// critically damped high-pass with its -3 dB point at `cutoff_hz`.
std::vector<double> compensation_noise(std::size_t length, double variance, double cutoff_hz,
                                       double fps, std::uint64_t stream_seed);

/// Natural cubic spline through y[0..n-1] at unit spacing, evaluated at
/// `positions` (clamped to [0, n-1]).
std::vector<double> natural_spline_resample(std::span<const double> y,
                                            std::span<const double> positions);

struct MotionOptions {
  double sample_rate_hz = 32.0;
  double amplitude_uv = 100.0;
  double noise_sigma_uv = 0.0;
  /// Unset: the chest stops (phase frozen) during apnea. Set: apnea breathes
  /// at this slow rate, like a servo driven at its minimum speed.
  std::optional<double> apnea_rate_hz;
};

/// Phase-continuous sinusoid following the schedule's rates, plus white noise.
signal::PneumogramRecord synth_motion_signal(const ctmc::SojournSchedule& schedule,
                                             const quantizer::StateSpace& ss,
                                             const MotionOptions& options, std::uint64_t seed);

}  // namespace breathsim::synth
