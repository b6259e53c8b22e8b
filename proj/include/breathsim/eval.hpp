#pragma once

// Model validation and detector scoring.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "breathsim/ctmc.hpp"
#include "breathsim/quantizer.hpp"
#include "breathsim/signal.hpp"

namespace breathsim::eval {

/// D_KL(p || q) in bits. Zero-mass terms of p contribute nothing; p_n > 0
/// with q_n = 0 throws kInfiniteDivergence.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Relative frequency of each state index, length N.
std::vector<double> occupancy_pmf(const quantizer::QuantizedTrajectory& qt);

struct RrAccuracy {
  /// Fraction of windows with true rate > 0 whose estimate is within the
  /// tolerance; unset when no such window exists.
  std::optional<double> p_correct;
  std::size_t correct = 0;
  std::size_t scored = 0;
  double rmse_hz = 0.0;
  /// RMSE divided by the mean true rate; unset when that mean is 0.
  std::optional<double> normalized_rmse;
};

RrAccuracy rr_accuracy(const signal::RrTrajectory& estimated, const signal::RrTrajectory& truth,
                       double tolerance_fraction = 0.15);

/// Binary per-step labels (apnea = true) on a uniform time grid; step j is
/// centered at origin_s + j * step_s.
class LabeledTimeline {
 public:
  LabeledTimeline(std::vector<std::uint8_t> labels, double step_s, double origin_s = 0.0);

  std::span<const std::uint8_t> labels() const { return labels_; }
  bool operator[](std::size_t j) const { return labels_[j] != 0; }
  std::size_t size() const { return labels_.size(); }
  double step_s() const { return step_s_; }
  double origin_s() const { return origin_s_; }
  double time_at(std::size_t j) const { return origin_s_ + static_cast<double>(j) * step_s_; }

 private:
  std::vector<std::uint8_t> labels_;
  double step_s_;
  double origin_s_;
};

struct ConfusionTimes {
  double tp_s = 0.0;
  double tn_s = 0.0;
  double fp_s = 0.0;
  double fn_s = 0.0;

  double total_s() const { return tp_s + tn_s + fp_s + fn_s; }
};

ConfusionTimes confusion_times(const LabeledTimeline& predicted, const LabeledTimeline& truth);

/// Sensitivity, specificity and diagnostic odds ratio; a quantity whose
/// denominator vanishes is left unset.
struct DetectionMetrics {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> dor;
};

DetectionMetrics sens_spec_dor(const ConfusionTimes& ct);

/// alpha/(1-alpha) * beta/(1-beta); unset if either rate equals 1.
std::optional<double> dor_from_rates(double sensitivity, double specificity);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;
  double auc = 0.0;
  double optimum_threshold = 0.0;
  std::size_t optimum_index = 0;
};

/// One point per threshold (positive iff score >= threshold); trapezoidal AUC
/// over the curve closed with (0,0) and (1,1); optimum is the point nearest
/// (0,1), ties to the higher threshold.
RocResult roc(std::span<const double> scores, const LabeledTimeline& truth,
              std::span<const double> thresholds);

/// `count` evenly spaced thresholds spanning [min(scores), max(scores)].
std::vector<double> even_thresholds(std::span<const double> scores, std::size_t count = 100);

struct Event {
  double start_s = 0.0;
  double end_s = 0.0;

  double duration_s() const { return end_s - start_s; }
};

/// Runs of positive steps, each covering half a step either side of its
/// first and last step centers.
std::vector<Event> extract_events(const LabeledTimeline& timeline);

/// Relabels positive runs shorter than `min_event_s` as negative.
LabeledTimeline suppress_short_events(const LabeledTimeline& timeline, double min_event_s);

/// Reference labels for `count` steps: step j is positive iff its center
/// falls inside an apnea sojourn lasting at least `min_event_s`.
LabeledTimeline apnea_truth(const ctmc::SojournSchedule& schedule, const quantizer::StateSpace& ss,
                            double step_s, double origin_s, std::size_t count, double min_event_s = 10.0);

struct DetectorOptions {
  double eta_uv = 400.0;
  signal::Band band{0.4, 1.5};
  /// Windows with amplitude <= threshold are apnea. Unset: half the median
  /// amplitude over non-movement windows.
  std::optional<double> amp_threshold;
  double min_event_s = 10.0;
};

struct Detection {
  /// Per-window amplitude estimate; low values indicate apnea.
  std::vector<double> amplitude;
  LabeledTimeline labels;
  double threshold = 0.0;

  /// Negated amplitude, so that higher means "more apnea-like" for roc().
  std::vector<double> apnea_scores() const;
};

Detection reference_apnea_detector(const signal::PneumogramRecord& record,
                                   const signal::WindowConfig& cfg, const DetectorOptions& options);

}  // namespace breathsim::eval
