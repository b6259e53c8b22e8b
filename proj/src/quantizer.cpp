#include "breathsim/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "breathsim/error.hpp"

namespace breathsim::quantizer {

namespace {

constexpr double kMaxLevelShift = 1e-9;
constexpr std::size_t kMaxIterations = 500;

// Cell k holds values in (b_{k-1}, b_k]; a value on a boundary goes to the
// lower cell, matching nearest_state's tie rule.
double distortion_of(std::span<const double> sorted, std::span<const double> levels) {
  double sum = 0.0;
  std::size_t k = 0;
  for (double v : sorted) {
    while (k + 1 < levels.size() && v > 0.5 * (levels[k] + levels[k + 1])) ++k;
    const double e = v - levels[k];
    sum += e * e;
  }
  return sum / static_cast<double>(sorted.size());
}

std::vector<double> quantile_seeds(std::span<const double> sorted, std::size_t levels) {
  std::vector<double> distinct;
  std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(distinct));
  if (distinct.size() < levels) {
    throw Error(ErrorCode::kDegenerateInput,
                std::to_string(distinct.size()) + " distinct values for " + std::to_string(levels) +
                    " levels (short by " + std::to_string(levels - distinct.size()) + ")");
  }

  const std::size_t n = sorted.size();
  std::vector<std::size_t> idx(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    const std::size_t rank = std::min(n - 1, (2 * k + 1) * n / (2 * levels));
    const double q = sorted[rank];
    idx[k] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), q) -
                                      distinct.begin());
  }
  // Coinciding quantiles are pushed apart onto neighbouring distinct values.
  for (std::size_t k = 1; k < levels; ++k) idx[k] = std::max(idx[k], idx[k - 1] + 1);
  if (idx.back() >= distinct.size()) idx.back() = distinct.size() - 1;
  for (std::size_t k = levels - 1; k-- > 0;) idx[k] = std::min(idx[k], idx[k + 1] - 1);

  std::vector<double> seeds(levels);
  for (std::size_t k = 0; k < levels; ++k) seeds[k] = distinct[idx[k]];
  return seeds;
}

}  // namespace

StateSpace::StateSpace(std::vector<double> rates, bool has_apnea, bool has_movement,
                       RateBounds bounds)
    : rates_(std::move(rates)), has_apnea_(has_apnea), has_movement_(has_movement), bounds_(bounds) {
  if (!(bounds_.low_hz > 0.0 && bounds_.low_hz < bounds_.high_hz &&
        bounds_.high_hz < bounds_.movement_hz)) {
    throw Error(ErrorCode::kConfiguration, "rate bounds must satisfy 0 < R_L < R_H < R_M");
  }
  const std::size_t reserved = (has_apnea_ ? 1 : 0) + (has_movement_ ? 1 : 0);
  if (rates_.empty() || rates_.size() < reserved) {
    throw Error(ErrorCode::kConfiguration, "state space has too few rates for its reserved states");
  }
  for (std::size_t n = 1; n < rates_.size(); ++n) {
    if (!(rates_[n] > rates_[n - 1])) {
      throw Error(ErrorCode::kConfiguration, "rates must be strictly increasing");
    }
  }
  if (has_apnea_ && rates_.front() != 0.0) {
    throw Error(ErrorCode::kConfiguration, "apnea state must have rate 0");
  }
  if (has_movement_) {
    if (rates_.back() != bounds_.movement_hz) {
      throw Error(ErrorCode::kConfiguration, "movement state must have rate R_M");
    }
    if (bounds_.movement_hz < 10.0 * bounds_.high_hz) {
      throw Error(ErrorCode::kConfiguration, "R_M must be at least 10 x R_H");
    }
  }
  const std::size_t first = has_apnea_ ? 1 : 0;
  const std::size_t last = rates_.size() - (has_movement_ ? 1 : 0);
  for (std::size_t n = first; n < last; ++n) {
    if (rates_[n] < bounds_.low_hz || rates_[n] > bounds_.high_hz) {
      throw Error(ErrorCode::kConfiguration,
                  "rate " + std::to_string(rates_[n]) + " Hz lies outside [R_L, R_H]");
    }
  }
}

StateSpace StateSpace::without_movement() const {
  if (!has_movement_) throw Error(ErrorCode::kNotApplicable, "state space has no movement state");
  std::vector<double> rates(rates_.begin(), rates_.end() - 1);
  return StateSpace(std::move(rates), has_apnea_, false, bounds_);
}

LloydMaxResult lloyd_max(std::span<const double> values, std::size_t levels) {
  if (levels == 0) throw Error(ErrorCode::kConfiguration, "Lloyd-Max needs at least one level");
  if (values.empty()) throw Error(ErrorCode::kDegenerateInput, "no values to quantize");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "non-finite value");
  }

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  LloydMaxResult result;
  result.levels = quantile_seeds(sorted, levels);
  result.distortion.push_back(distortion_of(sorted, result.levels));

  std::vector<double> next(levels);
  for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
    auto begin = sorted.begin();
    double max_shift = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
      auto end = sorted.end();
      if (k + 1 < levels) {
        const double boundary = 0.5 * (result.levels[k] + result.levels[k + 1]);
        end = std::upper_bound(begin, sorted.end(), boundary);
      }
      // An empty cell keeps its level; it stays between its neighbours.
      if (begin == end) {
        next[k] = result.levels[k];
      } else {
        double sum = 0.0;
        for (auto it = begin; it != end; ++it) sum += *it;
        next[k] = sum / static_cast<double>(end - begin);
      }
      max_shift = std::max(max_shift, std::abs(next[k] - result.levels[k]));
      begin = end;
    }
    result.levels.swap(next);
    result.distortion.push_back(distortion_of(sorted, result.levels));
    result.iterations = iter + 1;
    if (max_shift < kMaxLevelShift) break;
  }
  return result;
}

StateSpace build_state_space(const signal::RrTrajectory& traj, std::size_t n_states,
                             bool include_apnea, bool include_movement, const RateBounds& bounds) {
  const std::size_t reserved = (include_apnea ? 1 : 0) + (include_movement ? 1 : 0);
  if (n_states < 2 || n_states < reserved + 1) {
    throw Error(ErrorCode::kConfiguration,
                std::to_string(n_states) + " states cannot host " + std::to_string(reserved) +
                    " reserved states plus one free level");
  }

  // Apnea and movement samples are represented by the reserved states; the
  // rest is clamped into the physiological range before fitting.
  std::vector<double> fit_values;
  fit_values.reserve(traj.size());
  for (double v : traj.values) {
    if (v == 0.0 || v == bounds.movement_hz) continue;
    fit_values.push_back(std::clamp(v, bounds.low_hz, bounds.high_hz));
  }
  if (fit_values.empty()) {
    throw Error(ErrorCode::kDegenerateInput, "trajectory has no in-range values to fit");
  }

  auto fit = lloyd_max(fit_values, n_states - reserved);
  std::vector<double> rates;
  rates.reserve(n_states);
  if (include_apnea) rates.push_back(0.0);
  rates.insert(rates.end(), fit.levels.begin(), fit.levels.end());
  if (include_movement) rates.push_back(bounds.movement_hz);
  return StateSpace(std::move(rates), include_apnea, include_movement, bounds);
}

std::size_t nearest_state(double value, std::span<const double> rates) {
  std::size_t best = 0;
  double best_dist = std::abs(value - rates[0]);
  for (std::size_t n = 1; n < rates.size(); ++n) {
    const double d = std::abs(value - rates[n]);
    if (d < best_dist) {
      best_dist = d;
      best = n;
    }
  }
  return best;
}

QuantizedTrajectory quantize(const signal::RrTrajectory& traj, const StateSpace& ss) {
  QuantizedTrajectory qt{{}, traj.window_step_s, traj.origin_time_s, ss};
  qt.state_indices.reserve(traj.size());
  for (double v : traj.values) qt.state_indices.push_back(nearest_state(v, ss.rates()));
  return qt;
}

signal::RrTrajectory dequantize(const QuantizedTrajectory& qt) {
  signal::RrTrajectory traj;
  traj.window_step_s = qt.window_step_s;
  traj.origin_time_s = qt.origin_time_s;
  traj.values.reserve(qt.size());
  for (std::size_t n : qt.state_indices) traj.values.push_back(qt.state_space.rate(n));
  return traj;
}

}  // namespace breathsim::quantizer
