#include "breathsim/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "breathsim/error.hpp"

namespace breathsim::eval {

namespace {

void check_pmf(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidInput, std::string(name) + " has a negative or non-finite mass");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidInput, std::string(name) + " sums to " + std::to_string(sum));
  }
}

void check_aligned(const LabeledTimeline& a, const LabeledTimeline& b) {
  if (a.size() != b.size() || std::abs(a.step_s() - b.step_s()) > 1e-12 * b.step_s()) {
    throw Error(ErrorCode::kAlignment, "timelines differ in length or step");
  }
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw Error(ErrorCode::kAlignment, "distributions must share a non-empty support");
  }
  check_pmf(p, "p");
  check_pmf(q, "q");
  double bits = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    if (p[n] == 0.0) continue;
    if (q[n] == 0.0) {
      throw Error(ErrorCode::kInfiniteDivergence, "q has no mass at index " + std::to_string(n));
    }
    bits += p[n] * std::log2(p[n] / q[n]);
  }
  return bits;
}

std::vector<double> occupancy_pmf(const quantizer::QuantizedTrajectory& qt) {
  if (qt.size() == 0) throw Error(ErrorCode::kInsufficientData, "empty trajectory");
  std::vector<std::size_t> counts(qt.state_space.size(), 0);
  for (std::size_t s : qt.state_indices) ++counts.at(s);
  std::vector<double> pmf(counts.size());
  const auto total = static_cast<double>(qt.size());
  for (std::size_t n = 0; n < counts.size(); ++n) pmf[n] = static_cast<double>(counts[n]) / total;
  return pmf;
}

RrAccuracy rr_accuracy(const signal::RrTrajectory& estimated, const signal::RrTrajectory& truth,
                       double tolerance_fraction) {
  if (estimated.size() != truth.size() || estimated.size() == 0 ||
      std::abs(estimated.window_step_s - truth.window_step_s) > 1e-12 * truth.window_step_s) {
    throw Error(ErrorCode::kAlignment, "trajectories differ in length or step");
  }
  RrAccuracy acc;
  double sq = 0.0;
  double true_sum = 0.0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const double t = truth.values[j];
    const double e = estimated.values[j];
    sq += (e - t) * (e - t);
    true_sum += t;
    if (t > 0.0) {
      ++acc.scored;
      // Relative slack absorbs representation error at the boundary itself.
      if (std::abs(e - t) <= tolerance_fraction * t * (1.0 + 1e-12)) ++acc.correct;
    }
  }
  const auto n = static_cast<double>(truth.size());
  acc.rmse_hz = std::sqrt(sq / n);
  if (acc.scored > 0) acc.p_correct = static_cast<double>(acc.correct) / static_cast<double>(acc.scored);
  if (true_sum > 0.0) acc.normalized_rmse = acc.rmse_hz / (true_sum / n);
  return acc;
}

LabeledTimeline::LabeledTimeline(std::vector<std::uint8_t> labels, double step_s, double origin_s)
    : labels_(std::move(labels)), step_s_(step_s), origin_s_(origin_s) {
  if (labels_.empty()) throw Error(ErrorCode::kInsufficientData, "timeline is empty");
  if (!(step_s_ > 0.0)) throw Error(ErrorCode::kConfiguration, "timeline step must be positive");
}

ConfusionTimes confusion_times(const LabeledTimeline& predicted, const LabeledTimeline& truth) {
  check_aligned(predicted, truth);
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    const bool p = predicted[j];
    const bool t = truth[j];
    if (p && t) ++tp;
    else if (!p && !t) ++tn;
    else if (p) ++fp;
    else ++fn;
  }
  const double step = truth.step_s();
  return {static_cast<double>(tp) * step, static_cast<double>(tn) * step,
          static_cast<double>(fp) * step, static_cast<double>(fn) * step};
}

DetectionMetrics sens_spec_dor(const ConfusionTimes& ct) {
  DetectionMetrics m;
  if (ct.tp_s + ct.fn_s > 0.0) m.sensitivity = ct.tp_s / (ct.tp_s + ct.fn_s);
  if (ct.tn_s + ct.fp_s > 0.0) m.specificity = ct.tn_s / (ct.tn_s + ct.fp_s);
  if (ct.fn_s > 0.0 && ct.fp_s > 0.0) {
    m.dor = (ct.tp_s / ct.fn_s) / (ct.fp_s / ct.tn_s);
  }
  return m;
}

std::optional<double> dor_from_rates(double sensitivity, double specificity) {
  if (sensitivity >= 1.0 || specificity >= 1.0) return std::nullopt;
  return sensitivity / (1.0 - sensitivity) * specificity / (1.0 - specificity);
}

RocResult roc(std::span<const double> scores, const LabeledTimeline& truth,
              std::span<const double> thresholds) {
  if (scores.size() != truth.size()) throw Error(ErrorCode::kAlignment, "scores and labels differ in length");
  if (thresholds.empty()) throw Error(ErrorCode::kConfiguration, "no thresholds");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorCode::kConfiguration, "thresholds must be sorted");
  }
  std::size_t positives = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) positives += truth[j] ? 1 : 0;
  const std::size_t negatives = truth.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kUndefinedAxis, "truth must contain both classes");
  }

  // Sorting once turns each threshold into two binary searches.
  std::vector<double> pos_scores, neg_scores;
  for (std::size_t j = 0; j < truth.size(); ++j) (truth[j] ? pos_scores : neg_scores).push_back(scores[j]);
  std::sort(pos_scores.begin(), pos_scores.end());
  std::sort(neg_scores.begin(), neg_scores.end());
  auto at_least = [](const std::vector<double>& sorted, double thr) {
    return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), thr));
  };

  RocResult result;
  result.points.reserve(thresholds.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double thr = thresholds[i];
    RocPoint pt{thr, at_least(neg_scores, thr) / static_cast<double>(negatives),
                at_least(pos_scores, thr) / static_cast<double>(positives)};
    const double dist = std::hypot(pt.fpr, 1.0 - pt.tpr);
    if (dist <= best) {
      best = dist;
      result.optimum_index = i;
      result.optimum_threshold = thr;
    }
    result.points.push_back(pt);
  }

  std::vector<std::pair<double, double>> curve;
  curve.reserve(result.points.size() + 2);
  curve.emplace_back(0.0, 0.0);
  for (const auto& pt : result.points) curve.emplace_back(pt.fpr, pt.tpr);
  curve.emplace_back(1.0, 1.0);
  std::sort(curve.begin(), curve.end());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    result.auc += (curve[i].first - curve[i - 1].first) * 0.5 * (curve[i].second + curve[i - 1].second);
  }
  return result;
}

std::vector<double> even_thresholds(std::span<const double> scores, std::size_t count) {
  if (scores.empty() || count == 0) throw Error(ErrorCode::kConfiguration, "need scores and a positive count");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (count == 1 || *lo == *hi) return {*lo};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = *hi;
  return out;
}

std::vector<Event> extract_events(const LabeledTimeline& timeline) {
  std::vector<Event> events;
  const double half = 0.5 * timeline.step_s();
  std::size_t j = 0;
  while (j < timeline.size()) {
    if (!timeline[j]) {
      ++j;
      continue;
    }
    const std::size_t first = j;
    while (j < timeline.size() && timeline[j]) ++j;
    events.push_back({timeline.time_at(first) - half, timeline.time_at(j - 1) + half});
  }
  return events;
}

LabeledTimeline suppress_short_events(const LabeledTimeline& timeline, double min_event_s) {
  std::vector<std::uint8_t> labels(timeline.labels().begin(), timeline.labels().end());
  std::size_t j = 0;
  while (j < labels.size()) {
    if (!labels[j]) {
      ++j;
      continue;
    }
    const std::size_t first = j;
    while (j < labels.size() && labels[j]) ++j;
    const double duration = static_cast<double>(j - first) * timeline.step_s();
    if (duration < min_event_s * (1.0 - 1e-12)) std::fill(labels.begin() + first, labels.begin() + j, 0);
  }
  return LabeledTimeline(std::move(labels), timeline.step_s(), timeline.origin_s());
}

LabeledTimeline apnea_truth(const ctmc::SojournSchedule& schedule, const quantizer::StateSpace& ss,
                            double step_s, double origin_s, std::size_t count, double min_event_s) {
  if (!ss.has_apnea()) throw Error(ErrorCode::kNotApplicable, "state space has no apnea state");
  if (schedule.empty()) throw Error(ErrorCode::kEmptyPlan, "schedule has no sojourns");
  const auto sojourns = schedule.sojourns();
  const auto jumps = schedule.jump_times();
  std::vector<std::uint8_t> labels(count, 0);
  std::size_t l = 0;
  for (std::size_t j = 0; j < count; ++j) {
    const double t = origin_s + static_cast<double>(j) * step_s;
    while (l + 1 < sojourns.size() && t >= jumps[l]) ++l;
    const auto& so = sojourns[l];
    labels[j] = so.state == ss.apnea_index() && so.duration_s >= min_event_s ? 1 : 0;
  }
  return LabeledTimeline(std::move(labels), step_s, origin_s);
}

std::vector<double> Detection::apnea_scores() const {
  std::vector<double> out(amplitude.size());
  std::transform(amplitude.begin(), amplitude.end(), out.begin(), [](double a) { return -a; });
  return out;
}

Detection reference_apnea_detector(const signal::PneumogramRecord& record,
                                   const signal::WindowConfig& cfg, const DetectorOptions& options) {
  const auto windows = signal::analyze_windows(record, cfg, options.eta_uv, options.band);
  const double threshold = options.amp_threshold.value_or(5.0 * signal::default_amp_threshold(windows));

  std::vector<double> amplitude;
  std::vector<std::uint8_t> raw;
  amplitude.reserve(windows.size());
  raw.reserve(windows.size());
  for (const auto& w : windows) {
    amplitude.push_back(w.estimate.amplitude);
    raw.push_back(!w.movement && w.estimate.amplitude <= threshold ? 1 : 0);
  }
  const double step = static_cast<double>(cfg.step()) * record.sample_interval();
  const double origin = 0.5 * static_cast<double>(cfg.length()) * record.sample_interval();
  LabeledTimeline labels(std::move(raw), step, origin);
  return {std::move(amplitude), suppress_short_events(labels, options.min_event_s), threshold};
}

}  // namespace breathsim::eval
