#pragma once

// State-space selection (Lloyd-Max) and nearest-level quantization of a
// respiratory-rate trajectory.

#include <cstddef>
#include <span>
#include <vector>

#include "breathsim/signal.hpp"

namespace breathsim::quantizer {

/// Physiological range [low, high] and the movement sentinel rate.
struct RateBounds {
  double low_hz = 0.4;
  double high_hz = 1.5;
  double movement_hz = 15.0;

  static RateBounds newborn() { return {0.4, 1.5, 15.0}; }
  static RateBounds adult() { return {0.2, 1.0 / 3.0, 10.0}; }

  friend bool operator==(const RateBounds&, const RateBounds&) = default;
};

/// Ordered model rates. Rate 0 is reserved for apnea when has_apnea, the
/// last rate equals bounds.movement_hz when has_movement; every other rate
/// lies in [low, high].
class StateSpace {
 public:
  StateSpace(std::vector<double> rates, bool has_apnea, bool has_movement, RateBounds bounds);

  std::span<const double> rates() const { return rates_; }
  double rate(std::size_t n) const { return rates_.at(n); }
  std::size_t size() const { return rates_.size(); }
  bool has_apnea() const { return has_apnea_; }
  bool has_movement() const { return has_movement_; }
  const RateBounds& bounds() const { return bounds_; }

  std::size_t apnea_index() const { return 0; }
  std::size_t movement_index() const { return rates_.size() - 1; }

  /// Same space without the movement state.
  StateSpace without_movement() const;

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  std::vector<double> rates_;
  bool has_apnea_;
  bool has_movement_;
  RateBounds bounds_;
};

struct LloydMaxResult {
  std::vector<double> levels;
  /// Mean squared error at the quantile seeding, then after every iteration.
  std::vector<double> distortion;
  std::size_t iterations = 0;
};

/// Scalar Lloyd-Max quantizer with deterministic quantile seeding.
LloydMaxResult lloyd_max(std::span<const double> values, std::size_t levels);

/// Reserve the apnea/movement states as requested and fit the free levels to
/// the in-range part of the trajectory.
StateSpace build_state_space(const signal::RrTrajectory& traj, std::size_t n_states,
                             bool include_apnea, bool include_movement, const RateBounds& bounds);

struct QuantizedTrajectory {
  std::vector<std::size_t> state_indices;
  double window_step_s = 0.0;
  double origin_time_s = 0.0;
  StateSpace state_space;

  std::size_t size() const { return state_indices.size(); }
};

/// Index of the nearest rate; ties resolve to the lower index.
std::size_t nearest_state(double value, std::span<const double> rates);

QuantizedTrajectory quantize(const signal::RrTrajectory& traj, const StateSpace& ss);

/// Rate-valued sequence of a quantized trajectory.
signal::RrTrajectory dequantize(const QuantizedTrajectory& qt);

}  // namespace breathsim::quantizer
