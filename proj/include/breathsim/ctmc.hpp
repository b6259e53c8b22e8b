#pragma once

// Continuous-time Markov chain over respiratory-rate states: generator
// algebra, maximum-likelihood fitting and sojourn-schedule simulation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "breathsim/quantizer.hpp"

namespace breathsim::ctmc {

/// Row-sum tolerance for generators built or fitted in code.
inline constexpr double kGeneratorTolerance = 1e-9;

/// Transition-rate matrix (1/s): non-negative off-diagonal, each row summing
/// to zero within the construction tolerance.
class GeneratorMatrix {
 public:
  /// Row-major N*N entries.
  GeneratorMatrix(std::size_t n, std::vector<double> entries,
                  double row_sum_tolerance = kGeneratorTolerance);

  static GeneratorMatrix from_rows(const std::vector<std::vector<double>>& rows,
                                   double row_sum_tolerance = kGeneratorTolerance);

  /// Diagonal recomputed from the off-diagonal entries; `rows[m][m]` is ignored.
  static GeneratorMatrix from_off_diagonal(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }
  double operator()(std::size_t m, std::size_t n) const { return entries_[m * n_ + n]; }
  /// Exit rate mu_m = -lambda_{m,m}.
  double exit_rate(std::size_t m) const { return -entries_[m * n_ + m]; }
  /// Sum of the off-diagonal entries of row m.
  double off_diagonal_sum(std::size_t m) const;
  std::vector<std::vector<double>> rows() const;
  std::span<const double> entries() const { return entries_; }

 private:
  std::size_t n_;
  std::vector<double> entries_;
};

/// Jump-destination probabilities of the embedded discrete chain.
class EmbeddedChain {
 public:
  EmbeddedChain(std::size_t n, std::vector<double> probabilities);

  std::size_t size() const { return n_; }
  double operator()(std::size_t m, std::size_t n) const { return probs_[m * n_ + n]; }
  std::span<const double> row(std::size_t m) const {
    return std::span<const double>(probs_).subspan(m * n_, n_);
  }

 private:
  std::size_t n_;
  std::vector<double> probs_;
};

class StationaryDistribution {
 public:
  explicit StationaryDistribution(std::vector<double> probabilities);

  std::span<const double> values() const { return pi_; }
  double operator[](std::size_t n) const { return pi_[n]; }
  std::size_t size() const { return pi_.size(); }

 private:
  std::vector<double> pi_;
};

/// q_{m,n} = lambda_{m,n} / mu_m. Throws kSingularState for a state that
/// cannot be left.
EmbeddedChain embedded_chain(const GeneratorMatrix& generator);

/// Communicating classes of the off-diagonal support, each sorted, ordered
/// by their smallest member.
std::vector<std::vector<std::size_t>> communicating_classes(const GeneratorMatrix& generator);

struct StationaryOptions {
  /// States with an all-zero row and column (never visited during a fit)
  /// are left out of the irreducibility check and receive probability 0.
  bool allow_partial = false;
};

/// Solves pi * Lambda = 0, sum(pi) = 1 for an irreducible generator.
StationaryDistribution stationary(const GeneratorMatrix& generator, StationaryOptions options = {});

struct GeneratorFit {
  GeneratorMatrix generator;
  /// Transition counts N_{m,n} (row-major).
  std::vector<std::size_t> transitions;
  /// Holding time per state, seconds.
  std::vector<double> holding_s;
  /// States never visited by the trajectory; their rows are zero.
  std::vector<bool> unvisited;
};

/// Maximum-likelihood generator of a sampled trajectory treated as a
/// continuous-time path: every sample contributes one step of holding time
/// and every change between adjacent samples counts as one transition.
/// lambda_{m,n} = N_{m,n} / R_m, with R_m the time spent in the source state.
GeneratorFit fit_generator(const quantizer::QuantizedTrajectory& qt);

/// Drops the movement state (last row and column) and recomputes the diagonal.
std::pair<GeneratorMatrix, quantizer::StateSpace> strip_movement_state(
    const GeneratorMatrix& generator, const quantizer::StateSpace& ss);

struct Sojourn {
  std::size_t state = 0;
  double duration_s = 0.0;
};

/// Simulated path: sojourns with strictly positive durations, consecutive
/// states distinct. Jump time l is the sum of the first l+1 sojourns.
class SojournSchedule {
 public:
  explicit SojournSchedule(std::vector<Sojourn> sojourns, std::uint64_t seed = 0);

  std::span<const Sojourn> sojourns() const { return sojourns_; }
  std::span<const double> jump_times() const { return jump_times_; }
  std::size_t size() const { return sojourns_.size(); }
  bool empty() const { return sojourns_.empty(); }
  double total_duration_s() const { return jump_times_.empty() ? 0.0 : jump_times_.back(); }
  /// Start time of sojourn l (0 for the first).
  double start_time(std::size_t l) const { return l == 0 ? 0.0 : jump_times_[l - 1]; }
  std::uint64_t seed() const { return seed_; }

  /// State occupied at time t in [0, total); the last state for t >= total.
  std::size_t state_at(double t) const;

 private:
  std::vector<Sojourn> sojourns_;
  std::vector<double> jump_times_;
  std::uint64_t seed_;
};

/// Initial state from the stationary distribution, exponential sojourns,
/// destinations from the embedded chain; the final sojourn is truncated so
/// that the schedule ends exactly at `duration_s`.
SojournSchedule simulate(const GeneratorMatrix& generator, const quantizer::StateSpace& ss,
                         double duration_s, std::uint64_t seed);

/// Samples the schedule every `step_s` seconds starting at `origin_s`.
quantizer::QuantizedTrajectory sample_schedule(const SojournSchedule& schedule,
                                               const quantizer::StateSpace& ss, double step_s,
                                               double origin_s = 0.0);

}  // namespace breathsim::ctmc
