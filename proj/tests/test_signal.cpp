#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "breathsim/error.hpp"
#include "breathsim/rng.hpp"
#include "breathsim/signal.hpp"

using namespace breathsim;
using namespace breathsim::signal;

namespace {

std::vector<double> tone(double f, double amp, double fs, std::size_t n, double offset = 0.0,
                         double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = offset + amp * std::cos(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  }
  return x;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

}  // namespace

TEST(WindowConfig, FromSeconds) {
  const auto cfg = WindowConfig::from_seconds(10.0, 0.95, 32.0);
  EXPECT_EQ(cfg.length(), 320u);
  EXPECT_EQ(cfg.interlace(), 304u);
  EXPECT_EQ(cfg.step(), 16u);
  EXPECT_EQ(cfg.window_count(1920), 101u);
  EXPECT_EQ(cfg.window_count(319), 0u);
}

TEST(WindowConfig, RejectsBadOverlap) {
  EXPECT_EQ(code_of([] { WindowConfig::from_seconds(10.0, 1.0, 32.0); }), ErrorCode::kConfiguration);
  EXPECT_EQ(code_of([] { WindowConfig(320, 320); }), ErrorCode::kConfiguration);
}

TEST(EstimateFundamental, OnBinCosine) {
  const auto x = tone(1.0, 1.0, 32.0, 320);
  const auto est = estimate_fundamental(x, 32.0, {0.2, 3.0});
  EXPECT_DOUBLE_EQ(est.frequency_hz, 1.0);
  EXPECT_NEAR(est.amplitude, 1.0, 1e-9);
}

TEST(EstimateFundamental, MeanRemovedBeforePeakSearch) {
  const auto x = tone(0.9, 0.8, 32.0, 320, 5.0);
  const auto est = estimate_fundamental(x, 32.0, {0.1, 3.0});
  EXPECT_DOUBLE_EQ(est.frequency_hz, 0.9);
  EXPECT_NEAR(est.amplitude, 0.8, 1e-9);
}

TEST(EstimateFundamental, AmplitudeIndependentOfPhase) {
  const auto x = tone(0.7, 2.5, 32.0, 320, 0.0, 1.234);
  const auto est = estimate_fundamental(x, 32.0, {0.4, 1.5});
  EXPECT_DOUBLE_EQ(est.frequency_hz, 0.7);
  EXPECT_NEAR(est.amplitude, 2.5, 1e-9);
}

TEST(EstimateFundamental, PeakOutsideBandIgnored) {
  // A strong 3 Hz component outside [0.4, 1.5] must not win.
  auto x = tone(3.0, 10.0, 32.0, 320);
  const auto y = tone(1.2, 1.0, 32.0, 320);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  EXPECT_DOUBLE_EQ(estimate_fundamental(x, 32.0, {0.4, 1.5}).frequency_hz, 1.2);
}

TEST(EstimateFundamental, NoisyOnBinCosineMostlyRecovered) {
  // 10 dB SNR: noise variance = (A^2 / 2) / 10.
  const double amp = 1.0;
  const double sigma = std::sqrt(amp * amp / 2.0 / 10.0);
  const auto clean = tone(0.7, amp, 32.0, 320);
  Rng rng(2024);
  int hits = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto x = clean;
    for (double& v : x) v += sigma * rng.normal();
    if (estimate_fundamental(x, 32.0, {0.4, 1.5}).frequency_hz == 0.7) ++hits;
  }
  EXPECT_GE(hits, 990);
}

TEST(EstimateFundamental, ConstantWindowHasZeroAmplitude) {
  const std::vector<double> x(320, 3.0);
  const auto est = estimate_fundamental(x, 32.0, {0.4, 1.5});
  EXPECT_EQ(est.amplitude, 0.0);
  EXPECT_DOUBLE_EQ(est.frequency_hz, 0.4);  // ties go to the lowest bin
}

TEST(EstimateFundamental, Errors) {
  const auto x = tone(1.0, 1.0, 32.0, 320);
  // Bins are 0.1 Hz apart: (0.42, 0.48) contains none.
  EXPECT_EQ(code_of([&] { estimate_fundamental(x, 32.0, {0.42, 0.48}); }), ErrorCode::kInvalidBand);
  EXPECT_EQ(code_of([&] { estimate_fundamental(x, 32.0, {1.5, 0.4}); }), ErrorCode::kInvalidBand);
  auto bad = x;
  bad[17] = std::nan("");
  EXPECT_EQ(code_of([&] { estimate_fundamental(bad, 32.0, {0.4, 1.5}); }), ErrorCode::kInvalidInput);
}

TEST(DetectMovement, Threshold) {
  std::vector<double> x = tone(0.9, 100.0, 32.0, 320);
  EXPECT_FALSE(detect_movement(x, 400.0));
  x[10] = 400.0;
  EXPECT_FALSE(detect_movement(x, 400.0));
  x[10] = 401.0;
  EXPECT_TRUE(detect_movement(x, 400.0));
  x[10] = -401.0;
  EXPECT_TRUE(detect_movement(x, 400.0));
}

TEST(PneumogramRecord, Validation) {
  EXPECT_EQ(code_of([] { PneumogramRecord({}, 32.0); }), ErrorCode::kInsufficientData);
  EXPECT_EQ(code_of([] { PneumogramRecord({1.0, 2.0}, 0.0); }), ErrorCode::kInvalidInput);
  EXPECT_EQ(code_of([] { PneumogramRecord({1.0, INFINITY}, 32.0); }), ErrorCode::kInvalidInput);
}

TEST(EstimateRrTrajectory, PureToneEveryWindow) {
  const PneumogramRecord rec(tone(0.9, 300.0, 32.0, 1920), 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.95, 32.0);
  const auto traj = estimate_rr_trajectory(rec, cfg, {});
  ASSERT_EQ(traj.size(), 101u);
  for (double v : traj.values) EXPECT_DOUBLE_EQ(v, 0.9);
  EXPECT_DOUBLE_EQ(traj.window_step_s, 0.5);
  EXPECT_DOUBLE_EQ(traj.origin_time_s, 5.0);
  EXPECT_DOUBLE_EQ(traj.time_at(2), 6.0);
}

TEST(EstimateRrTrajectory, SpikeMarksExactlyCoveringWindows) {
  auto x = tone(0.9, 300.0, 32.0, 1920);
  const std::size_t spike = 700;
  x[spike] = 500.0;
  const PneumogramRecord rec(x, 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.95, 32.0);
  const auto traj = estimate_rr_trajectory(rec, cfg, {});
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const std::size_t start = j * cfg.step();
    const bool covers = start <= spike && spike < start + cfg.length();
    EXPECT_DOUBLE_EQ(traj.values[j], covers ? 15.0 : 0.9) << "window " << j;
  }
}

TEST(EstimateRrTrajectory, LeadingSilenceIsApnea) {
  auto x = tone(0.9, 300.0, 32.0, 1920 + 320);
  for (std::size_t i = 0; i < 320; ++i) x[i] = 0.0;
  const PneumogramRecord rec(x, 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.95, 32.0);
  const auto traj = estimate_rr_trajectory(rec, cfg, {});
  EXPECT_DOUBLE_EQ(traj.values.front(), 0.0);
  EXPECT_DOUBLE_EQ(traj.values.back(), 0.9);
  // Windows starting at or after the onset see the full tone.
  for (std::size_t j = 20; j < traj.size(); ++j) EXPECT_DOUBLE_EQ(traj.values[j], 0.9);
}

TEST(EstimateRrTrajectory, ExplicitThresholdGatesLowAmplitude) {
  const PneumogramRecord rec(tone(0.9, 20.0, 32.0, 640), 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.5, 32.0);
  RrOptions opt;
  opt.amp_threshold = 25.0;
  for (double v : estimate_rr_trajectory(rec, cfg, opt).values) EXPECT_EQ(v, 0.0);
  opt.amp_threshold = 15.0;
  for (double v : estimate_rr_trajectory(rec, cfg, opt).values) EXPECT_DOUBLE_EQ(v, 0.9);
}

TEST(EstimateRrTrajectory, AllZeroSignalIsApnea) {
  const PneumogramRecord rec(std::vector<double>(640, 0.0), 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.5, 32.0);
  for (double v : estimate_rr_trajectory(rec, cfg, {}).values) EXPECT_EQ(v, 0.0);
}

TEST(EstimateRrTrajectory, ShortRecordRejected) {
  const PneumogramRecord rec(tone(0.9, 300.0, 32.0, 100), 32.0);
  const auto cfg = WindowConfig::from_seconds(10.0, 0.95, 32.0);
  EXPECT_EQ(code_of([&] { estimate_rr_trajectory(rec, cfg, {}); }), ErrorCode::kInsufficientData);
}

TEST(DefaultAmpThreshold, TenthOfMedianIgnoringMovement) {
  std::vector<WindowAnalysis> w(4);
  w[0].estimate.amplitude = 10.0;
  w[1].estimate.amplitude = 30.0;
  w[2].estimate.amplitude = 20.0;
  w[3].estimate.amplitude = 1000.0;
  w[3].movement = true;
  EXPECT_DOUBLE_EQ(default_amp_threshold(w), 2.0);
  w[2].movement = true;
  EXPECT_DOUBLE_EQ(default_amp_threshold(w), 2.0);  // median of {10, 30}
}
