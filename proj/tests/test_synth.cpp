#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "breathsim/error.hpp"
#include "breathsim/rng.hpp"
#include "breathsim/signal.hpp"
#include "breathsim/synth.hpp"

using namespace breathsim;
using namespace breathsim::synth;
using ctmc::SojournSchedule;
using quantizer::RateBounds;
using quantizer::StateSpace;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

// Every pixel oscillates at `freq` with a pixel-dependent phase.
FrameSequence tone_frames(std::size_t frames, std::size_t h, std::size_t w, double fps, double freq) {
  std::vector<float> px(frames * h * w);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t p = 0; p < h * w; ++p) {
      const double phase = 0.1 * static_cast<double>(p);
      px[f * h * w + p] = static_cast<float>(
          0.5 + 0.3 * std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(f) / fps + phase));
    }
  }
  return FrameSequence(frames, h, w, fps, std::move(px));
}

std::vector<double> pixel_series(const FrameSequence& fs, std::size_t p) {
  std::vector<double> out(fs.frames());
  for (std::size_t f = 0; f < fs.frames(); ++f) out[f] = fs.data()[f * fs.pixels_per_frame() + p];
  return out;
}

// Dense natural-spline solve: unknown second derivatives M_0..M_{n-1} with
// M_0 = M_{n-1} = 0, solved by Gaussian elimination with partial pivoting.
std::vector<double> dense_natural_spline(const std::vector<double>& y, const std::vector<double>& xs) {
  const std::size_t n = y.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  a[0][0] = 1.0;
  a[n - 1][n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    a[i][i - 1] = 1.0;
    a[i][i] = 4.0;
    a[i][i + 1] = 1.0;
    a[i][n] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = a[i][n] / a[i][i];
  std::vector<double> out;
  for (double x : xs) {
    auto i = static_cast<std::size_t>(x);
    if (i >= n - 1) i = n - 2;
    const double t = x - static_cast<double>(i);
    const double u = 1.0 - t;
    out.push_back(u * y[i] + t * y[i + 1] + ((u * u * u - u) * m[i] + (t * t * t - t) * m[i + 1]) / 6.0);
  }
  return out;
}

double periodogram_band_power(const std::vector<double>& x, double fs, double lo, double hi) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = fs * static_cast<double>(k) / static_cast<double>(n);
    if (f < lo || f >= hi) continue;
    std::complex<double> acc;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                                        static_cast<double>(n));
    }
    total += std::norm(acc);
  }
  return total;
}

const StateSpace kApneaSpace({0.0, 0.5, 0.9, 1.32}, true, false, RateBounds::newborn());

}  // namespace

TEST(NormalizeRates, PrintedVideoRate) {
  const auto r = normalize_rates(kApneaSpace, 0.69, 0.1);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_NEAR(r[0], 0.1 / 0.69, 1e-12);
  EXPECT_NEAR(r[0], 0.1449, 1e-4);
  EXPECT_NEAR(r[1], 0.7246, 1e-4);
  EXPECT_NEAR(r[2], 1.3043, 1e-4);
  EXPECT_NEAR(r[3], 1.9130, 1e-4);
}

TEST(NormalizeRates, IdentityAndErrors) {
  const StateSpace ss({0.69, 1.0}, false, false, RateBounds::newborn());
  EXPECT_EQ(normalize_rates(ss, 0.69, 0.1)[0], 1.0);
  const StateSpace with_movement({0.0, 0.5, 15.0}, true, true, RateBounds::newborn());
  EXPECT_EQ(code_of([&] { normalize_rates(with_movement, 0.69, 0.1); }), ErrorCode::kMustStrip);
  EXPECT_EQ(code_of([&] { normalize_rates(kApneaSpace, 0.69, 0.5); }), ErrorCode::kConfiguration);
}

TEST(CvScaling, SlowestExitPlaysAtNativeSpeed) {
  const auto g = ctmc::GeneratorMatrix::from_rows({{-0.5, 0.5, 0.0}, {0.05, -0.1, 0.05}, {0.0, 0.3, -0.3}});
  const std::vector<double> norm = {0.5, 2.0, 4.0};
  const auto scaled = apply_cv_scaling(norm, g);
  EXPECT_DOUBLE_EQ(scaled[1], 1.0);
  EXPECT_DOUBLE_EQ(scaled[0], 0.25);
  EXPECT_DOUBLE_EQ(scaled[2], 2.0);
}

TEST(PlanWarp, FrameArithmetic) {
  const SojournSchedule s({{0, 4.0}, {1, 4.0}});
  const std::vector<double> norm = {0.5, 1.0};
  const auto plan = plan_warp(s, norm, 25.0, 1000);
  ASSERT_EQ(plan.records.size(), 2u);
  EXPECT_EQ(plan.records[0].frame_budget, 100u);
  EXPECT_EQ(plan.records[0].block_length, 50u);
  EXPECT_EQ(plan.records[0].jump_frame, 100u);
  EXPECT_EQ(plan.records[0].source_start, 100u);
  EXPECT_EQ(plan.records[1].frame_budget, 100u);
  EXPECT_EQ(plan.records[1].block_length, 100u);
  EXPECT_EQ(plan.records[1].jump_frame, 200u);
  EXPECT_EQ(plan.output_frames(), 200u);
}

TEST(PlanWarp, StartWrapsInsideSource) {
  const SojournSchedule s({{0, 10.0}, {1, 3.0}});
  const std::vector<double> norm = {1.0, 2.0};
  const auto plan = plan_warp(s, norm, 25.0, 300);
  // Block 0 starts at frame 250 but needs 250 + 1 frames: restart at 0.
  EXPECT_EQ(plan.records[0].source_start, 0u);
  // Block 1: jump frame 325 wraps to 25, needs 150 + 1 frames.
  EXPECT_EQ(plan.records[1].source_start, 25u);
}

TEST(PlanWarp, OutputFramesIsSumOfBudgets) {
  Rng rng(3);
  std::vector<ctmc::Sojourn> so;
  for (int l = 0; l < 50; ++l) so.push_back({static_cast<std::size_t>(l % 3), 0.2 + 5.0 * rng.uniform()});
  const SojournSchedule s(so);
  const std::vector<double> norm = {0.4, 1.0, 1.7};
  const auto plan = plan_warp(s, norm, 30.0, 2000);
  std::size_t sum = 0;
  for (const auto& so_l : s.sojourns()) sum += static_cast<std::size_t>(std::llround(so_l.duration_s * 30.0));
  EXPECT_EQ(plan.output_frames(), sum);
}

TEST(PlanWarp, Errors) {
  const SojournSchedule empty({});
  const std::vector<double> norm = {1.0};
  EXPECT_EQ(code_of([&] { plan_warp(empty, norm, 25.0, 100); }), ErrorCode::kEmptyPlan);
}

TEST(WarpFrames, IdentityIsBitExact) {
  const auto src = tone_frames(200, 4, 5, 25.0, 0.9);
  const SojournSchedule s({{0, 3.0}, {1, 2.0}});
  const std::vector<double> norm = {1.0, 1.0};
  const auto plan = plan_warp(s, norm, 25.0, src.frames());
  const auto out = warp_frames(src, plan, {}, 1);
  ASSERT_EQ(out.frames(), 125u);
  for (std::size_t f = 0; f < 75; ++f) {
    for (std::size_t p = 0; p < 20; ++p) ASSERT_EQ(out.frame(f)[p], src.frame(75 + f)[p]);
  }
}

TEST(WarpFrames, FrequencyScaling) {
  const double fps = 25.0;
  const auto src = tone_frames(1500, 3, 3, fps, 0.9);
  for (double rate : {0.25, 0.5, 2.0, 4.0}) {
    const double tau = rate < 1.0 ? 40.0 : 12.0;
    const SojournSchedule s({{0, tau}});
    const std::vector<double> norm = {rate};
    auto plan = plan_warp(s, norm, fps, src.frames());
    const auto out = warp_frames(src, plan, {}, 1);
    ASSERT_EQ(out.frames(), static_cast<std::size_t>(tau * fps));
    const double bin = fps / static_cast<double>(out.frames());
    for (std::size_t p = 0; p < 9; ++p) {
      const auto est = signal::estimate_fundamental(pixel_series(out, p), fps, {bin, fps / 2.0});
      EXPECT_NEAR(est.frequency_hz, 0.9 * rate, bin) << "rate " << rate << " pixel " << p;
    }
  }
}

TEST(WarpFrames, PlanMismatch) {
  const auto src = tone_frames(100, 2, 2, 25.0, 0.9);
  const SojournSchedule s({{0, 1.0}});
  const std::vector<double> norm = {1.0};
  const auto plan = plan_warp(s, norm, 25.0, 99);
  EXPECT_EQ(code_of([&] { warp_frames(src, plan, {}, 1); }), ErrorCode::kConsistency);
}

TEST(NoiseVariance, ConstantFramesAndRegionChecks) {
  const FrameSequence flat(10, 4, 4, 25.0, std::vector<float>(160, 0.3f));
  EXPECT_EQ(estimate_noise_variance(flat, {0, 0, 4, 4}), 0.0);
  EXPECT_EQ(code_of([&] { estimate_noise_variance(flat, {0, 0, 0, 4}); }), ErrorCode::kInvalidRegion);
  EXPECT_EQ(code_of([&] { estimate_noise_variance(flat, {2, 0, 3, 4}); }), ErrorCode::kInvalidRegion);
}

TEST(NoiseVariance, MatchesInjectedNoise) {
  Rng rng(4);
  std::vector<float> px(2000 * 16);
  for (float& v : px) v = static_cast<float>(0.5 + 0.05 * rng.normal());
  const FrameSequence src(2000, 4, 4, 25.0, std::move(px));
  EXPECT_NEAR(estimate_noise_variance(src, {0, 0, 4, 4}), 0.0025, 0.0025 * 0.05);
}

TEST(CompensationNoise, ZeroVarianceIsSilent) {
  for (double v : compensation_noise(100, 0.0, 3.0, 25.0, 1)) EXPECT_EQ(v, 0.0);
}

TEST(CompensationNoise, HighPassSpectrum) {
  const double fps = 25.0, cutoff = 3.125;
  const auto x = compensation_noise(4096, 1.0, cutoff, fps, 12);
  const double below = periodogram_band_power(x, fps, 0.0, cutoff / 4.0);
  const double above = periodogram_band_power(x, fps, cutoff, fps / 2.0 + 1.0);
  EXPECT_LE(below, 0.1 * above);
}

TEST(CompensationNoise, LowCutoffPassesMostPower) {
  const auto x = compensation_noise(200000, 1.0, 0.5, 25.0, 3);
  double s2 = 0.0;
  for (double v : x) s2 += v * v;
  const double var = s2 / static_cast<double>(x.size());
  EXPECT_GT(var, 0.85);
  EXPECT_LT(var, 1.0);
}

TEST(CompensationNoise, HalfPowerAtCutoff) {
  // The high-pass passes Nyquist with unit gain, so the mean periodogram level
  // next to the cutoff is half the level next to Nyquist.
  const double fps = 25.0, cutoff = 3.125;
  const auto x = compensation_noise(1 << 15, 1.0, cutoff, fps, 21);
  const double near_cut = periodogram_band_power(x, fps, cutoff * 0.97, cutoff * 1.03);
  const double near_nyq = periodogram_band_power(x, fps, fps / 2.0 - cutoff * 0.06, fps / 2.0 + 1.0);
  EXPECT_NEAR(near_cut / near_nyq, 0.5, 0.08);
}

TEST(CompensationNoise, DeterministicAndValidated) {
  EXPECT_EQ(compensation_noise(64, 0.5, 2.0, 25.0, 9), compensation_noise(64, 0.5, 2.0, 25.0, 9));
  EXPECT_NE(compensation_noise(64, 0.5, 2.0, 25.0, 9), compensation_noise(64, 0.5, 2.0, 25.0, 10));
  EXPECT_EQ(code_of([] { compensation_noise(64, 0.5, 12.5, 25.0, 9); }), ErrorCode::kInvalidCutoff);
  EXPECT_EQ(code_of([] { compensation_noise(64, 0.5, 0.0, 25.0, 9); }), ErrorCode::kInvalidCutoff);
}

TEST(NaturalSpline, MatchesDenseSolve) {
  Rng rng(8);
  for (std::size_t n : {2u, 3u, 7u, 40u}) {
    std::vector<double> y(n);
    for (double& v : y) v = rng.normal();
    std::vector<double> xs;
    for (int k = 0; k < 300; ++k) xs.push_back(rng.uniform() * static_cast<double>(n - 1));
    const auto got = natural_spline_resample(y, xs);
    const auto want = dense_natural_spline(y, xs);
    for (std::size_t k = 0; k < xs.size(); ++k) ASSERT_NEAR(got[k], want[k], 1e-12) << n;
  }
}

TEST(NaturalSpline, InterpolatesKnotsAndLines) {
  const std::vector<double> y = {1.0, 3.0, 5.0, 7.0, 9.0};
  const std::vector<double> xs = {0.0, 0.5, 1.0, 2.25, 3.9, 4.0};
  const auto out = natural_spline_resample(y, xs);
  for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_NEAR(out[k], 1.0 + 2.0 * xs[k], 1e-12);
}

TEST(MotionSignal, SingleStateRoundTrip) {
  const StateSpace ss({0.9}, false, false, RateBounds::newborn());
  const SojournSchedule s({{0, 60.0}});
  const auto rec = synth_motion_signal(s, ss, {}, 1);
  EXPECT_EQ(rec.size(), 1920u);
  const auto traj = signal::estimate_rr_trajectory(rec, signal::WindowConfig::from_seconds(10.0, 0.95, 32.0), {});
  for (double v : traj.values) EXPECT_DOUBLE_EQ(v, 0.9);
}

TEST(MotionSignal, ApneaWindowsReportZero) {
  const SojournSchedule s({{2, 30.0}, {0, 15.0}, {2, 30.0}});
  const auto rec = synth_motion_signal(s, kApneaSpace, {}, 1);
  const auto cfg = signal::WindowConfig::from_seconds(10.0, 0.95, 32.0);
  const auto traj = signal::estimate_rr_trajectory(rec, cfg, {});
  int inside = 0;
  for (std::size_t j = 0; j < traj.size(); ++j) {
    const double start = static_cast<double>(j * cfg.step()) / 32.0;
    if (start >= 30.0 && start + 10.0 <= 45.0) {
      ++inside;
      EXPECT_EQ(traj.values[j], 0.0) << j;
    }
  }
  EXPECT_GT(inside, 0);
}

TEST(MotionSignal, PhaseContinuity) {
  const SojournSchedule s({{1, 7.3}, {3, 4.1}, {0, 3.0}, {2, 5.0}});
  MotionOptions opt;
  const auto rec = synth_motion_signal(s, kApneaSpace, opt, 1);
  const double max_step = opt.amplitude_uv * 2.0 * std::numbers::pi * 1.32 / opt.sample_rate_hz;
  const auto x = rec.samples();
  for (std::size_t i = 1; i < x.size(); ++i) ASSERT_LE(std::abs(x[i] - x[i - 1]), max_step + 1e-9) << i;
}

TEST(MotionSignal, ZeroAmplitudeIsApnea) {
  const StateSpace ss({0.9}, false, false, RateBounds::newborn());
  MotionOptions opt;
  opt.amplitude_uv = 0.0;
  const auto rec = synth_motion_signal(SojournSchedule({{0, 30.0}}), ss, opt, 1);
  const auto traj = signal::estimate_rr_trajectory(rec, signal::WindowConfig::from_seconds(10.0, 0.95, 32.0), {});
  for (double v : traj.values) EXPECT_EQ(v, 0.0);
}

TEST(MotionSignal, NoiseIsSeeded) {
  const StateSpace ss({0.9}, false, false, RateBounds::newborn());
  MotionOptions opt;
  opt.noise_sigma_uv = 10.0;
  const SojournSchedule s({{0, 10.0}});
  const auto a = synth_motion_signal(s, ss, opt, 5);
  const auto b = synth_motion_signal(s, ss, opt, 5);
  const auto c = synth_motion_signal(s, ss, opt, 6);
  EXPECT_TRUE(std::equal(a.samples().begin(), a.samples().end(), b.samples().begin()));
  EXPECT_FALSE(std::equal(a.samples().begin(), a.samples().end(), c.samples().begin()));
}

TEST(MotionSignal, Errors) {
  const StateSpace with_movement({0.0, 0.5, 15.0}, true, true, RateBounds::newborn());
  EXPECT_EQ(code_of([&] { synth_motion_signal(SojournSchedule({{2, 5.0}}), with_movement, {}, 1); }),
            ErrorCode::kUnsupportedState);
  MotionOptions slow;
  slow.sample_rate_hz = 2.0;
  EXPECT_EQ(code_of([&] { synth_motion_signal(SojournSchedule({{3, 5.0}}), kApneaSpace, slow, 1); }),
            ErrorCode::kConfiguration);
}
