#include "breathsim/ctmc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "breathsim/error.hpp"
#include "breathsim/rng.hpp"

namespace breathsim::ctmc {

namespace {

std::string format_classes(const std::vector<std::vector<std::size_t>>& classes) {
  std::string out;
  for (const auto& cls : classes) {
    out += out.empty() ? "{" : ", {";
    for (std::size_t i = 0; i < cls.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(cls[i]);
    }
    out += "}";
  }
  return out;
}

// Transitive closure of the off-diagonal support restricted to `active`.
std::vector<std::vector<std::size_t>> classes_over(const GeneratorMatrix& g,
                                                   const std::vector<bool>& active) {
  const std::size_t n = g.size();
  std::vector<char> reach(n * n, 0);
  for (std::size_t m = 0; m < n; ++m) {
    reach[m * n + m] = 1;
    for (std::size_t k = 0; k < n; ++k) {
      if (m != k && active[m] && active[k] && g(m, k) > 0.0) reach[m * n + k] = 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!reach[i * n + k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (reach[k * n + j]) reach[i * n + j] = 1;
      }
    }
  }
  std::vector<std::vector<std::size_t>> classes;
  std::vector<bool> assigned(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i] || !active[i]) continue;
    std::vector<std::size_t> cls;
    for (std::size_t j = i; j < n; ++j) {
      if (active[j] && reach[i * n + j] && reach[j * n + i]) {
        cls.push_back(j);
        assigned[j] = true;
      }
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace

GeneratorMatrix::GeneratorMatrix(std::size_t n, std::vector<double> entries,
                                 double row_sum_tolerance)
    : n_(n), entries_(std::move(entries)) {
  if (n_ == 0) throw Error(ErrorCode::kConfiguration, "generator must have at least one state");
  if (entries_.size() != n_ * n_) {
    throw Error(ErrorCode::kConfiguration, "generator needs " + std::to_string(n_ * n_) + " entries");
  }
  for (std::size_t m = 0; m < n_; ++m) {
    double row_sum = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const double v = (*this)(m, k);
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "generator entry is not finite");
      if (m != k && v < 0.0) {
        throw Error(ErrorCode::kConfiguration, "negative off-diagonal rate at (" +
                                                   std::to_string(m) + "," + std::to_string(k) + ")");
      }
      row_sum += v;
    }
    if ((*this)(m, m) > 0.0) {
      throw Error(ErrorCode::kConfiguration, "positive diagonal at row " + std::to_string(m));
    }
    if (std::abs(row_sum) > row_sum_tolerance) {
      throw Error(ErrorCode::kConfiguration,
                  "row " + std::to_string(m) + " sums to " + std::to_string(row_sum));
    }
  }
}

GeneratorMatrix GeneratorMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                           double row_sum_tolerance) {
  const std::size_t n = rows.size();
  std::vector<double> entries;
  entries.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw Error(ErrorCode::kConfiguration, "generator must be square");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return GeneratorMatrix(n, std::move(entries), row_sum_tolerance);
}

GeneratorMatrix GeneratorMatrix::from_off_diagonal(const std::vector<std::vector<double>>& rows) {
  auto copy = rows;
  for (std::size_t m = 0; m < copy.size(); ++m) {
    if (copy[m].size() != copy.size()) throw Error(ErrorCode::kConfiguration, "generator must be square");
    double sum = 0.0;
    for (std::size_t k = 0; k < copy.size(); ++k) {
      if (k != m) sum += copy[m][k];
    }
    copy[m][m] = -sum;
  }
  return from_rows(copy);
}

double GeneratorMatrix::off_diagonal_sum(std::size_t m) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    if (k != m) sum += (*this)(m, k);
  }
  return sum;
}

std::vector<std::vector<double>> GeneratorMatrix::rows() const {
  std::vector<std::vector<double>> out(n_);
  for (std::size_t m = 0; m < n_; ++m) {
    out[m].assign(entries_.begin() + static_cast<std::ptrdiff_t>(m * n_),
                  entries_.begin() + static_cast<std::ptrdiff_t>((m + 1) * n_));
  }
  return out;
}

EmbeddedChain::EmbeddedChain(std::size_t n, std::vector<double> probabilities)
    : n_(n), probs_(std::move(probabilities)) {
  if (probs_.size() != n_ * n_) throw Error(ErrorCode::kConfiguration, "embedded chain shape");
  for (std::size_t m = 0; m < n_; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const double q = (*this)(m, k);
      if (q < 0.0 || (k == m && q != 0.0)) {
        throw Error(ErrorCode::kConfiguration, "invalid embedded-chain row " + std::to_string(m));
      }
      sum += q;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kConfiguration, "embedded-chain row " + std::to_string(m) +
                                                 " sums to " + std::to_string(sum));
    }
  }
}

StationaryDistribution::StationaryDistribution(std::vector<double> probabilities)
    : pi_(std::move(probabilities)) {
  double sum = 0.0;
  for (double p : pi_) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kConfiguration, "negative stationary probability");
    sum += p;
  }
  if (pi_.empty() || std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfiguration, "stationary distribution does not sum to 1");
  }
}

EmbeddedChain embedded_chain(const GeneratorMatrix& generator) {
  const std::size_t n = generator.size();
  std::vector<double> probs(n * n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    // Normalising by the off-diagonal sum rather than -lambda_{m,m} keeps the
    // rows stochastic for generators whose diagonal carries rounding error.
    const double mu = generator.off_diagonal_sum(m);
    if (!(mu > 0.0)) {
      throw Error(ErrorCode::kSingularState, "state " + std::to_string(m) + " has zero exit rate");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (k != m) probs[m * n + k] = generator(m, k) / mu;
    }
  }
  return EmbeddedChain(n, std::move(probs));
}

std::vector<std::vector<std::size_t>> communicating_classes(const GeneratorMatrix& generator) {
  return classes_over(generator, std::vector<bool>(generator.size(), true));
}

StationaryDistribution stationary(const GeneratorMatrix& generator, StationaryOptions options) {
  const std::size_t n = generator.size();
  std::vector<bool> active(n, true);
  if (options.allow_partial) {
    for (std::size_t m = 0; m < n; ++m) {
      bool isolated = true;
      for (std::size_t k = 0; k < n && isolated; ++k) {
        if (k != m && (generator(m, k) != 0.0 || generator(k, m) != 0.0)) isolated = false;
      }
      active[m] = !isolated;
    }
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) active.assign(n, true);
  }

  const auto classes = classes_over(generator, active);
  if (classes.size() != 1) {
    throw Error(ErrorCode::kReducible, "chain has communicating classes " + format_classes(classes));
  }

  const auto& states = classes.front();
  const auto k = static_cast<Eigen::Index>(states.size());
  // Columns of Lambda^T restricted to the active states; the last balance
  // equation is replaced by the normalisation row.
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      a(i, j) = generator(states[static_cast<std::size_t>(j)], states[static_cast<std::size_t>(i)]);
    }
  }
  a.row(k - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b(k - 1) = 1.0;
  const Eigen::VectorXd x = a.fullPivLu().solve(b);

  std::vector<double> pi(n, 0.0);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = std::max(0.0, x(i));
    pi[states[static_cast<std::size_t>(i)]] = p;
    sum += p;
  }
  for (double& p : pi) p /= sum;
  return StationaryDistribution(std::move(pi));
}

GeneratorFit fit_generator(const quantizer::QuantizedTrajectory& qt) {
  if (qt.size() < 2) throw Error(ErrorCode::kInsufficientData, "fit needs at least two samples");
  if (!(qt.window_step_s > 0.0)) throw Error(ErrorCode::kConfiguration, "trajectory step must be positive");
  const std::size_t n = qt.state_space.size();

  std::vector<std::size_t> counts(n * n, 0);
  std::vector<double> holding(n, 0.0);
  std::size_t total_transitions = 0;
  for (std::size_t j = 0; j < qt.size(); ++j) {
    const std::size_t s = qt.state_indices[j];
    if (s >= n) throw Error(ErrorCode::kInvalidInput, "state index out of range");
    holding[s] += qt.window_step_s;
    if (j > 0 && qt.state_indices[j - 1] != s) {
      ++counts[qt.state_indices[j - 1] * n + s];
      ++total_transitions;
    }
  }
  if (total_transitions == 0) {
    throw Error(ErrorCode::kNoTransitions, "trajectory never leaves state " +
                                               std::to_string(qt.state_indices.front()));
  }

  std::vector<double> entries(n * n, 0.0);
  std::vector<bool> unvisited(n, false);
  for (std::size_t m = 0; m < n; ++m) {
    unvisited[m] = holding[m] == 0.0;
    if (unvisited[m]) continue;
    double exit = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == m) continue;
      const double rate = static_cast<double>(counts[m * n + k]) / holding[m];
      entries[m * n + k] = rate;
      exit += rate;
    }
    entries[m * n + m] = -exit;
  }
  return {GeneratorMatrix(n, std::move(entries)), std::move(counts), std::move(holding),
          std::move(unvisited)};
}

std::pair<GeneratorMatrix, quantizer::StateSpace> strip_movement_state(
    const GeneratorMatrix& generator, const quantizer::StateSpace& ss) {
  if (!ss.has_movement()) throw Error(ErrorCode::kNotApplicable, "state space has no movement state");
  if (generator.size() != ss.size()) {
    throw Error(ErrorCode::kConsistency, "generator and state space differ in size");
  }
  const std::size_t n = generator.size() - 1;
  std::vector<double> entries(n * n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    double exit = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == m) continue;
      entries[m * n + k] = generator(m, k);
      exit += generator(m, k);
    }
    entries[m * n + m] = -exit;
  }
  return {GeneratorMatrix(n, std::move(entries)), ss.without_movement()};
}

SojournSchedule::SojournSchedule(std::vector<Sojourn> sojourns, std::uint64_t seed)
    : sojourns_(std::move(sojourns)), seed_(seed) {
  jump_times_.reserve(sojourns_.size());
  double t = 0.0;
  for (std::size_t l = 0; l < sojourns_.size(); ++l) {
    if (!(sojourns_[l].duration_s > 0.0) || !std::isfinite(sojourns_[l].duration_s)) {
      throw Error(ErrorCode::kInvalidInput, "sojourn " + std::to_string(l) + " is not positive");
    }
    if (l > 0 && sojourns_[l].state == sojourns_[l - 1].state) {
      throw Error(ErrorCode::kInvalidInput, "sojourns " + std::to_string(l - 1) + " and " +
                                                std::to_string(l) + " share a state");
    }
    const double next = t + sojourns_[l].duration_s;
    if (!(next > t)) throw Error(ErrorCode::kInvalidInput, "jump times must increase strictly");
    t = next;
    jump_times_.push_back(t);
  }
}

std::size_t SojournSchedule::state_at(double t) const {
  if (sojourns_.empty()) throw Error(ErrorCode::kEmptyPlan, "schedule is empty");
  const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.end()) return sojourns_.back().state;
  return sojourns_[static_cast<std::size_t>(it - jump_times_.begin())].state;
}

SojournSchedule simulate(const GeneratorMatrix& generator, const quantizer::StateSpace& ss,
                         double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::kConfiguration, "simulation duration must be positive");
  }
  if (generator.size() != ss.size()) {
    throw Error(ErrorCode::kConsistency, "generator and state space differ in size");
  }
  if (generator.size() == 1) return SojournSchedule({{0, duration_s}}, seed);

  const auto pi = stationary(generator);
  const auto chain = embedded_chain(generator);
  Rng rng(seed);

  auto draw = [&rng](std::span<const double> weights) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last_positive = i;
      cumulative += weights[i];
      if (u < cumulative) return i;
    }
    return last_positive;
  };

  std::vector<Sojourn> sojourns;
  std::size_t state = draw(pi.values());
  double t = 0.0;
  while (true) {
    const double mu = generator.exit_rate(state);
    double tau = rng.exponential(mu);
    while (!(t + tau > t)) tau = rng.exponential(mu);
    if (t + tau >= duration_s) {
      sojourns.push_back({state, duration_s - t});
      break;
    }
    sojourns.push_back({state, tau});
    t += tau;
    state = draw(chain.row(state));
  }
  return SojournSchedule(std::move(sojourns), seed);
}

quantizer::QuantizedTrajectory sample_schedule(const SojournSchedule& schedule,
                                               const quantizer::StateSpace& ss, double step_s,
                                               double origin_s) {
  if (!(step_s > 0.0)) throw Error(ErrorCode::kConfiguration, "sampling step must be positive");
  quantizer::QuantizedTrajectory qt{{}, step_s, origin_s, ss};
  const double total = schedule.total_duration_s();
  const auto jumps = schedule.jump_times();
  const auto sojourns = schedule.sojourns();
  std::size_t l = 0;
  for (std::size_t j = 0;; ++j) {
    const double t = origin_s + static_cast<double>(j) * step_s;
    if (t >= total) break;
    while (l + 1 < sojourns.size() && t >= jumps[l]) ++l;
    const std::size_t s = sojourns[l].state;
    if (s >= ss.size()) throw Error(ErrorCode::kConsistency, "schedule state outside the state space");
    qt.state_indices.push_back(s);
  }
  return qt;
}

}  // namespace breathsim::ctmc
