#include "breathsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "breathsim/error.hpp"
#include "breathsim/rng.hpp"

namespace breathsim::synth {

namespace {

// Natural cubic spline on knots 0..n-1 evaluated at fixed positions. The
// tridiagonal system (1, 4, 1) depends only on n, so its forward sweep is
// shared by every pixel of a block.
class SplineResampler {
 public:
  SplineResampler(std::size_t knots, std::span<const double> positions) : n_(knots) {
    if (n_ >= 3) {
      const std::size_t m = n_ - 2;
      c_prime_.resize(m);
      denom_.resize(m);
      double c = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = 4.0 - c;
        denom_[i] = d;
        c = 1.0 / d;
        c_prime_[i] = c;
      }
    }
    segment_.reserve(positions.size());
    frac_.reserve(positions.size());
    const double last = static_cast<double>(n_ - 1);
    for (double x : positions) {
      x = std::clamp(x, 0.0, last);
      auto i = static_cast<std::size_t>(std::floor(x));
      if (n_ >= 2 && i > n_ - 2) i = n_ - 2;
      segment_.push_back(i);
      frac_.push_back(x - static_cast<double>(i));
    }
  }

  void apply(std::span<const double> y, std::span<double> out) {
    if (n_ == 1) {
      std::fill(out.begin(), out.end(), y[0]);
      return;
    }
    second_.assign(n_, 0.0);
    if (n_ >= 3) {
      const std::size_t m = n_ - 2;
      rhs_.resize(m);
      double prev = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double r = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
        prev = (r - prev) / denom_[i];
        rhs_[i] = prev;
      }
      for (std::size_t i = m; i-- > 0;) {
        if (i + 1 < m) rhs_[i] -= c_prime_[i] * rhs_[i + 1];
        second_[i + 1] = rhs_[i];
      }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
      const std::size_t i = segment_[k];
      const double t = frac_[k];
      const double u = 1.0 - t;
      out[k] = u * y[i] + t * y[i + 1] + ((u * u * u - u) * second_[i] + (t * t * t - t) * second_[i + 1]) / 6.0;
    }
  }

 private:
  std::size_t n_;
  std::vector<double> c_prime_;
  std::vector<double> denom_;
  std::vector<std::size_t> segment_;
  std::vector<double> frac_;
  std::vector<double> second_;
  std::vector<double> rhs_;
};

void validate_region(const FrameSequence& src, const Region& region) {
  if (region.width == 0 || region.height == 0 || region.x + region.width > src.width() ||
      region.y + region.height > src.height()) {
    throw Error(ErrorCode::kInvalidRegion, "region must be non-empty and inside the frame");
  }
}

}  // namespace

FrameSequence::FrameSequence(std::size_t frames, std::size_t height, std::size_t width, double fps,
                             std::vector<float> pixels)
    : frames_(frames), height_(height), width_(width), fps_(fps), pixels_(std::move(pixels)) {
  if (frames_ < 2) throw Error(ErrorCode::kInvalidInput, "frame sequence needs at least 2 frames");
  if (height_ == 0 || width_ == 0) throw Error(ErrorCode::kInvalidInput, "frames must be non-empty");
  if (!(fps_ > 0.0) || !std::isfinite(fps_)) throw Error(ErrorCode::kInvalidInput, "frame rate must be positive");
  if (pixels_.size() != frames_ * height_ * width_) {
    throw Error(ErrorCode::kInvalidInput, "pixel buffer does not match the frame dimensions");
  }
  for (float p : pixels_) {
    if (!std::isfinite(p)) throw Error(ErrorCode::kInvalidInput, "non-finite pixel");
  }
}

std::vector<double> normalize_rates(const quantizer::StateSpace& ss, double video_rate_hz,
                                    double apnea_rate_hz) {
  if (ss.has_movement()) {
    throw Error(ErrorCode::kMustStrip, "strip the movement state before normalizing rates");
  }
  if (!(video_rate_hz > 0.0)) throw Error(ErrorCode::kConfiguration, "video rate must be positive");
  if (ss.has_apnea() && !(apnea_rate_hz > 0.0 && apnea_rate_hz < ss.bounds().low_hz)) {
    throw Error(ErrorCode::kConfiguration, "apnea rate must satisfy 0 < rate < R_L");
  }
  std::vector<double> out;
  out.reserve(ss.size());
  for (std::size_t n = 0; n < ss.size(); ++n) {
    const double rate = (ss.has_apnea() && n == 0) ? apnea_rate_hz : ss.rate(n);
    out.push_back(rate / video_rate_hz);
  }
  return out;
}

std::vector<double> apply_cv_scaling(std::span<const double> normalized,
                                     const ctmc::GeneratorMatrix& generator) {
  if (normalized.size() != generator.size()) {
    throw Error(ErrorCode::kConsistency, "rate count differs from the generator size");
  }
  std::size_t slowest = 0;
  for (std::size_t n = 1; n < generator.size(); ++n) {
    if (generator.exit_rate(n) < generator.exit_rate(slowest)) slowest = n;
  }
  const double scale = 1.0 / normalized[slowest];
  std::vector<double> out(normalized.begin(), normalized.end());
  for (double& r : out) r *= scale;
  return out;
}

std::size_t WarpPlan::output_frames() const {
  std::size_t total = 0;
  for (const auto& r : records) total += r.frame_budget;
  return total;
}

WarpPlan plan_warp(const ctmc::SojournSchedule& schedule, std::span<const double> normalized,
                   double fps, std::size_t source_frames) {
  if (schedule.empty()) throw Error(ErrorCode::kEmptyPlan, "schedule has no sojourns");
  if (!(fps > 0.0)) throw Error(ErrorCode::kConfiguration, "frame rate must be positive");
  if (source_frames < 2) throw Error(ErrorCode::kConfiguration, "source needs at least 2 frames");

  WarpPlan plan{{}, fps, source_frames};
  plan.records.reserve(schedule.size());
  const auto sojourns = schedule.sojourns();
  const auto jumps = schedule.jump_times();
  for (std::size_t l = 0; l < sojourns.size(); ++l) {
    const std::size_t state = sojourns[l].state;
    if (state >= normalized.size()) {
      throw Error(ErrorCode::kConsistency, "schedule state " + std::to_string(state) + " has no rate");
    }
    const double rate = normalized[state];
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw Error(ErrorCode::kConfiguration, "normalized rates must be positive");
    }
    const double tau = sojourns[l].duration_s;
    WarpRecord rec;
    rec.state = state;
    rec.normalized_rate = rate;
    rec.frame_budget = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(tau * fps)));
    rec.jump_frame = static_cast<std::size_t>(std::llround(jumps[l] * fps));
    // Source frames are consumed at `rate` times the output pace.
    rec.block_length = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tau * rate * fps)));
    // The spline also reads the frame after the block; a block that would run
    // past the source end restarts at frame 0.
    std::size_t start = rec.jump_frame % source_frames;
    if (start + rec.block_length + 1 > source_frames) start = 0;
    rec.source_start = start;
    plan.records.push_back(rec);
  }
  return plan;
}

double estimate_noise_variance(const FrameSequence& src, const Region& region) {
  validate_region(src, region);
  const std::size_t frames = src.frames();
  double total = 0.0;
  for (std::size_t r = region.y; r < region.y + region.height; ++r) {
    for (std::size_t c = region.x; c < region.x + region.width; ++c) {
      double mean = 0.0;
      for (std::size_t f = 0; f < frames; ++f) mean += src.at(f, r, c);
      mean /= static_cast<double>(frames);
      double ss = 0.0;
      for (std::size_t f = 0; f < frames; ++f) {
        const double d = src.at(f, r, c) - mean;
        ss += d * d;
      }
      total += ss / static_cast<double>(frames - 1);
    }
  }
  return total / static_cast<double>(region.width * region.height);
}

std::vector<double> compensation_noise(std::size_t length, double variance, double cutoff_hz,
                                       double fps, std::uint64_t stream_seed) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < fps / 2.0)) {
    throw Error(ErrorCode::kInvalidCutoff, "cutoff must lie in (0, fps/2)");
  }
  if (!(variance >= 0.0)) throw Error(ErrorCode::kInvalidInput, "variance must be non-negative");
  std::vector<double> out(length, 0.0);
  if (variance == 0.0) return out;

  // Two identical first-order sections (a double real pole) via the bilinear
  // transform, prewarped so that the cascade is -3 dB at the cutoff. Each
  // section is then -1.5 dB there, i.e. its own corner sits a factor
  // sqrt(1 + sqrt(2)) lower.
  const double prewarped = 2.0 * fps * std::tan(std::numbers::pi * cutoff_hz / fps);
  const double corner = prewarped / std::sqrt(1.0 + std::numbers::sqrt2);
  const double gain = 2.0 * fps / (2.0 * fps + corner);
  const double pole = (2.0 * fps - corner) / (2.0 * fps + corner);

  Rng rng(stream_seed);
  const double sigma = std::sqrt(variance);
  double x1 = 0.0, y1 = 0.0, z1 = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double x = sigma * rng.normal();
    const double y = pole * y1 + gain * (x - x1);
    const double z = pole * z1 + gain * (y - y1);
    out[i] = z;
    x1 = x;
    y1 = y;
    z1 = z;
  }
  return out;
}

std::vector<double> natural_spline_resample(std::span<const double> y,
                                            std::span<const double> positions) {
  if (y.empty()) throw Error(ErrorCode::kInvalidInput, "spline needs at least one knot");
  SplineResampler resampler(y.size(), positions);
  std::vector<double> out(positions.size());
  resampler.apply(y, out);
  return out;
}

FrameSequence warp_frames(const FrameSequence& src, const WarpPlan& plan, const NoiseOptions& noise,
                          std::uint64_t seed) {
  if (plan.source_frames != src.frames() || plan.fps != src.fps()) {
    throw Error(ErrorCode::kConsistency, "warp plan was built for a different source");
  }
  if (plan.records.empty()) throw Error(ErrorCode::kEmptyPlan, "warp plan is empty");

  const double noise_variance = noise.enabled ? estimate_noise_variance(src, noise.region) : 0.0;
  const std::size_t pixels = src.pixels_per_frame();
  const std::size_t src_frames = src.frames();
  const auto data = src.data();

  std::vector<float> out;
  out.reserve(plan.output_frames() * pixels);

  std::vector<double> series;
  std::vector<double> resampled;
  std::vector<double> block;
  for (std::size_t b = 0; b < plan.records.size(); ++b) {
    const auto& rec = plan.records[b];
    const std::size_t budget = rec.frame_budget;

    if (rec.normalized_rate == 1.0) {
      for (std::size_t k = 0; k < budget; ++k) {
        const auto frame = src.frame((rec.source_start + k) % src_frames);
        out.insert(out.end(), frame.begin(), frame.end());
      }
      continue;
    }

    const std::size_t knots = rec.block_length + 1;
    std::vector<double> positions(budget);
    const double spacing = static_cast<double>(rec.block_length) / static_cast<double>(budget);
    for (std::size_t k = 0; k < budget; ++k) positions[k] = spacing * static_cast<double>(k);
    SplineResampler resampler(knots, positions);

    const double stretch = static_cast<double>(budget) / static_cast<double>(rec.block_length);
    const bool add_noise = noise.enabled && noise_variance > 0.0 && rec.normalized_rate < 1.0 &&
                           stretch > 1.0;
    const double cutoff = src.fps() / (2.0 * stretch);

    block.assign(budget * pixels, 0.0);
    series.resize(knots);
    resampled.resize(budget);
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t i = 0; i < knots; ++i) {
        series[i] = data[((rec.source_start + i) % src_frames) * pixels + p];
      }
      resampler.apply(series, resampled);
      if (add_noise) {
        const auto comp = compensation_noise(budget, noise_variance, cutoff, src.fps(),
                                             derive_seed(seed, b * pixels + p));
        for (std::size_t k = 0; k < budget; ++k) resampled[k] += comp[k];
      }
      for (std::size_t k = 0; k < budget; ++k) block[k * pixels + p] = resampled[k];
    }
    for (double v : block) out.push_back(static_cast<float>(std::clamp(v, 0.0, 1.0)));
  }

  const std::size_t frames = out.size() / pixels;
  return FrameSequence(frames, src.height(), src.width(), src.fps(), std::move(out));
}

signal::PneumogramRecord synth_motion_signal(const ctmc::SojournSchedule& schedule,
                                             const quantizer::StateSpace& ss,
                                             const MotionOptions& options, std::uint64_t seed) {
  if (schedule.empty()) throw Error(ErrorCode::kEmptyPlan, "schedule has no sojourns");
  const double fs = options.sample_rate_hz;
  double max_rate = options.apnea_rate_hz.value_or(0.0);
  for (const auto& s : schedule.sojourns()) {
    if (s.state >= ss.size()) throw Error(ErrorCode::kConsistency, "schedule state outside the state space");
    if (ss.has_movement() && s.state == ss.movement_index()) {
      throw Error(ErrorCode::kUnsupportedState, "movement state cannot be synthesized");
    }
    max_rate = std::max(max_rate, ss.rate(s.state));
  }
  if (!(fs > 2.0 * max_rate)) {
    throw Error(ErrorCode::kConfiguration, "sample rate must exceed twice the highest rate");
  }

  const auto count = static_cast<std::size_t>(std::llround(schedule.total_duration_s() * fs));
  if (count == 0) throw Error(ErrorCode::kInsufficientData, "schedule shorter than one sample");

  Rng rng(seed);
  const auto jumps = schedule.jump_times();
  const auto sojourns = schedule.sojourns();
  std::vector<double> samples(count);
  double phase = 0.0;
  std::size_t l = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / fs;
    while (l + 1 < sojourns.size() && t >= jumps[l]) ++l;
    const std::size_t state = sojourns[l].state;
    double rate = ss.rate(state);
    if (ss.has_apnea() && state == ss.apnea_index()) rate = options.apnea_rate_hz.value_or(0.0);
    samples[i] = options.amplitude_uv * std::cos(phase);
    if (options.noise_sigma_uv > 0.0) samples[i] += options.noise_sigma_uv * rng.normal();
    phase += 2.0 * std::numbers::pi * rate / fs;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
  }
  return signal::PneumogramRecord(std::move(samples), fs);
}

}  // namespace breathsim::synth
