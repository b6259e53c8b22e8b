#include "breathsim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "breathsim/error.hpp"

namespace breathsim::signal {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kInvalidInput,
                  std::string(what) + " sample " + std::to_string(i) + " is not finite");
    }
  }
}

// DFT coefficient of a mean-removed window at integer bin k. The twiddle
// index (k*i) mod M keeps the phase argument exact for long windows.
std::complex<double> dft_bin(std::span<const double> centered, std::size_t k) {
  const std::size_t m = centered.size();
  const double w = 2.0 * std::numbers::pi / static_cast<double>(m);
  double re = 0.0;
  double im = 0.0;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double phase = w * static_cast<double>(idx);
    re += centered[i] * std::cos(phase);
    im -= centered[i] * std::sin(phase);
    idx += k;
    if (idx >= m) idx -= m;
  }
  return {re, im};
}

}  // namespace

PneumogramRecord::PneumogramRecord(std::vector<double> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_(sample_rate_hz) {
  if (samples_.empty()) throw Error(ErrorCode::kInsufficientData, "pneumogram has no samples");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw Error(ErrorCode::kInvalidInput, "sample rate must be positive and finite");
  }
  require_finite(samples_, "pneumogram");
}

WindowConfig::WindowConfig(std::size_t length, std::size_t interlace)
    : length_(length), interlace_(interlace) {
  if (length_ < 4) throw Error(ErrorCode::kConfiguration, "window length must be >= 4 samples");
  if (interlace_ >= length_) {
    throw Error(ErrorCode::kConfiguration, "interlace must be smaller than the window length");
  }
}

WindowConfig WindowConfig::from_seconds(double window_s, double overlap, double sample_rate_hz) {
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(ErrorCode::kConfiguration, "overlap must lie in [0, 1)");
  }
  if (!(window_s > 0.0) || !(sample_rate_hz > 0.0)) {
    throw Error(ErrorCode::kConfiguration, "window duration and sample rate must be positive");
  }
  const auto length = static_cast<std::size_t>(std::llround(window_s * sample_rate_hz));
  const auto interlace = static_cast<std::size_t>(std::llround(overlap * window_s * sample_rate_hz));
  return WindowConfig(length, interlace);
}

std::size_t WindowConfig::window_count(std::size_t samples) const {
  if (samples < length_) return 0;
  return (samples - length_) / step() + 1;
}

FundamentalEstimate estimate_fundamental(std::span<const double> window, double sample_rate_hz,
                                         Band band) {
  const std::size_t m = window.size();
  if (m < 4) throw Error(ErrorCode::kInsufficientData, "window needs at least 4 samples");
  if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz <= sample_rate_hz / 2.0)) {
    throw Error(ErrorCode::kInvalidBand, "band must satisfy 0 < low < high <= fs/2");
  }
  require_finite(window, "window");

  // Bins whose physical frequency fs*k/M falls inside the band; a relative
  // slack absorbs rounding when a band edge sits exactly on a bin.
  const double bins_per_hz = static_cast<double>(m) / sample_rate_hz;
  constexpr double kSlack = 1e-9;
  const auto k_lo = static_cast<std::size_t>(std::ceil(band.low_hz * bins_per_hz - kSlack));
  const auto k_hi = std::min(static_cast<std::size_t>(std::floor(band.high_hz * bins_per_hz + kSlack)),
                             m / 2);
  if (k_lo > k_hi || k_lo == 0) {
    throw Error(ErrorCode::kInvalidBand, "no DFT bin of a " + std::to_string(m) +
                                             "-sample window falls inside the band");
  }

  double mean = 0.0;
  for (double v : window) mean += v;
  mean /= static_cast<double>(m);
  std::vector<double> centered(window.begin(), window.end());
  for (double& v : centered) v -= mean;

  std::size_t best_bin = k_lo;
  double best_power = -1.0;
  std::complex<double> best_coeff;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const auto coeff = dft_bin(centered, k);
    const double power = std::norm(coeff);
    if (power > best_power) {
      best_power = power;
      best_bin = k;
      best_coeff = coeff;
    }
  }

  return {static_cast<double>(best_bin) / bins_per_hz,
          2.0 / static_cast<double>(m) * std::abs(best_coeff)};
}

bool detect_movement(std::span<const double> window, double eta) {
  return std::any_of(window.begin(), window.end(), [eta](double v) { return std::abs(v) > eta; });
}

std::vector<WindowAnalysis> analyze_windows(const PneumogramRecord& record, const WindowConfig& cfg,
                                            double eta, Band band) {
  if (!(eta > 0.0)) throw Error(ErrorCode::kConfiguration, "movement threshold must be positive");
  const std::size_t count = cfg.window_count(record.size());
  if (count == 0) {
    throw Error(ErrorCode::kInsufficientData,
                "record has " + std::to_string(record.size()) + " samples, window needs " +
                    std::to_string(cfg.length()));
  }
  std::vector<WindowAnalysis> out(count);
  const auto samples = record.samples();
  for (std::size_t j = 0; j < count; ++j) {
    const auto window = samples.subspan(j * cfg.step(), cfg.length());
    out[j].movement = detect_movement(window, eta);
    out[j].estimate = estimate_fundamental(window, record.sample_rate(), band);
  }
  return out;
}

double default_amp_threshold(std::span<const WindowAnalysis> windows) {
  std::vector<double> amps;
  amps.reserve(windows.size());
  for (const auto& w : windows) {
    if (!w.movement) amps.push_back(w.estimate.amplitude);
  }
  if (amps.empty()) return 0.0;
  const std::size_t mid = amps.size() / 2;
  std::nth_element(amps.begin(), amps.begin() + static_cast<std::ptrdiff_t>(mid), amps.end());
  double median = amps[mid];
  if (amps.size() % 2 == 0) {
    const double lower = *std::max_element(amps.begin(), amps.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return 0.1 * median;
}

RrTrajectory estimate_rr_trajectory(const PneumogramRecord& record, const WindowConfig& cfg,
                                    const RrOptions& options) {
  if (!(options.r_low_hz > 0.0 && options.r_low_hz < options.r_high_hz &&
        options.r_high_hz < options.r_movement_hz)) {
    throw Error(ErrorCode::kConfiguration, "rate bounds must satisfy 0 < R_L < R_H < R_M");
  }
  const auto windows =
      analyze_windows(record, cfg, options.eta_uv, {options.r_low_hz, options.r_high_hz});
  const double amp_threshold = options.amp_threshold.value_or(default_amp_threshold(windows));

  RrTrajectory traj;
  traj.window_step_s = static_cast<double>(cfg.step()) * record.sample_interval();
  traj.origin_time_s = 0.5 * static_cast<double>(cfg.length()) * record.sample_interval();
  traj.values.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.movement) {
      traj.values.push_back(options.r_movement_hz);
    } else if (w.estimate.frequency_hz < options.r_low_hz || w.estimate.amplitude < amp_threshold ||
               w.estimate.amplitude == 0.0) {
      traj.values.push_back(0.0);
    } else {
      traj.values.push_back(w.estimate.frequency_hz);
    }
  }
  return traj;
}

}  // namespace breathsim::signal
