#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "breathsim/ctmc.hpp"
#include "breathsim/error.hpp"
#include "breathsim/eval.hpp"
#include "breathsim/io.hpp"
#include "breathsim/quantizer.hpp"
#include "breathsim/signal.hpp"
#include "breathsim/synth.hpp"

namespace breathsim::cli {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  return out;
}

std::string read_text(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(io::parse_double(token, what));
  return out;
}

quantizer::RateBounds bounds_of(const PipelineConfig& cfg) {
  return {cfg.r_low_hz, cfg.r_high_hz, cfg.r_movement_hz};
}

std::string config_comment(const PipelineConfig& cfg) { return "config=" + cfg.to_json().dump(); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Options shared by commands that consume the pipeline configuration.
struct CommonOptions {
  PipelineConfig config;
  std::string config_path;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "JSON config; its keys override the flags");
    cmd.add_option("--window-s", config.window_s, "Analysis window length in seconds");
    cmd.add_option("--overlap", config.overlap, "Window overlap fraction in [0, 1)");
    cmd.add_option("--r-low", config.r_low_hz, "Lowest breathing rate R_L (Hz)");
    cmd.add_option("--r-high", config.r_high_hz, "Highest breathing rate R_H (Hz)");
    cmd.add_option("--r-movement", config.r_movement_hz, "Movement sentinel rate R_M (Hz)");
    cmd.add_option("--eta", config.eta_uv, "Movement threshold (uV)");
    cmd.add_option("--apnea-rate", config.apnea_rate_hz, "Substitute rate for apnea when warping (Hz)");
    cmd.add_option("--states", config.n_states, "Number of model states N");
    cmd.add_option("--seed", config.seed, "Random seed");
  }

  PipelineConfig resolve(const std::optional<double>& amp_threshold) {
    if (amp_threshold) config.amp_threshold = amp_threshold;
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(read_text(config_path));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParse, "config: " + std::string(e.what()));
      }
      config.merge_json(j);
    }
    config.validate();
    return config;
  }
};

int cmd_estimate_rr(const PipelineConfig& cfg, const std::string& input, const std::string& output) {
  auto in = open_input(input);
  const auto record = io::read_pneumogram_csv(in);
  const auto window = signal::WindowConfig::from_seconds(cfg.window_s, cfg.overlap, record.sample_rate());
  signal::RrOptions options{cfg.eta_uv, cfg.r_low_hz, cfg.r_high_hz, cfg.r_movement_hz, cfg.amp_threshold};
  const auto traj = signal::estimate_rr_trajectory(record, window, options);
  auto out = open_output(output);
  io::write_trajectory_csv(out, traj, {config_comment(cfg)});
  return 0;
}

int cmd_fit(const PipelineConfig& cfg, const std::string& input, const std::string& output,
            bool allow_partial) {
  auto in = open_input(input);
  const auto traj = io::read_trajectory_csv(in);
  const auto ss = quantizer::build_state_space(traj, cfg.n_states, cfg.apnea, cfg.movement, bounds_of(cfg));
  const auto qt = quantizer::quantize(traj, ss);
  const auto fit = ctmc::fit_generator(qt);
  const auto pi = ctmc::stationary(fit.generator, {allow_partial});

  io::Model model{ss, fit.generator, std::vector<double>(pi.values().begin(), pi.values().end()),
                  {std::filesystem::path(input).filename().string(), traj.window_step_s, std::nullopt}};
  auto j = json::parse(io::model_to_json(model));
  j["config"] = cfg.to_json();
  auto out = open_output(output);
  out << j.dump(2) << '\n';
  return 0;
}

io::Model load_model(const std::string& path) { return io::model_from_json(read_text(path)); }

int cmd_simulate(const std::string& model_path, double duration, std::uint64_t seed, bool strip,
                 const std::string& output) {
  if (!(duration > 0.0)) throw Error(ErrorCode::kConfiguration, "duration must be positive");
  auto model = load_model(model_path);
  auto generator = model.generator;
  auto ss = model.state_space;
  if (strip) std::tie(generator, ss) = ctmc::strip_movement_state(generator, ss);
  const auto schedule = ctmc::simulate(generator, ss, duration, seed);
  auto out = open_output(output);
  io::write_schedule_csv(out, schedule, ss);
  return 0;
}

struct SynthArgs {
  std::string schedule_path;
  std::string model_path;
  std::string signal_path;
  std::string frames_path;
  std::string output_path;
  double fs = 32.0;
  double amplitude = 100.0;
  double noise_sigma = 0.0;
  double video_rate = 0.69;
  bool cv_scale = false;
  bool noise_comp = false;
  std::string region;
  bool breathe_apnea = false;
};

int cmd_synth(const PipelineConfig& cfg, const SynthArgs& a) {
  auto sched_in = open_input(a.schedule_path);
  const auto schedule = io::read_schedule_csv(sched_in);
  auto model = load_model(a.model_path);
  auto generator = model.generator;
  auto ss = model.state_space;
  if (ss.has_movement()) std::tie(generator, ss) = ctmc::strip_movement_state(generator, ss);

  if (!a.signal_path.empty()) {
    synth::MotionOptions options;
    options.sample_rate_hz = a.fs;
    options.amplitude_uv = a.amplitude;
    options.noise_sigma_uv = a.noise_sigma;
    if (a.breathe_apnea) options.apnea_rate_hz = cfg.apnea_rate_hz;
    const auto record = synth::synth_motion_signal(schedule, ss, options, cfg.seed);
    auto out = open_output(a.signal_path);
    io::write_pneumogram_csv(out, record, {config_comment(cfg)});
    return 0;
  }

  auto src_in = open_input(a.frames_path);
  const auto src = io::read_fseq(src_in);
  auto rates = synth::normalize_rates(ss, a.video_rate, cfg.apnea_rate_hz);
  if (a.cv_scale) rates = synth::apply_cv_scaling(rates, generator);
  const auto plan = synth::plan_warp(schedule, rates, src.fps(), src.frames());
  synth::NoiseOptions noise;
  noise.enabled = a.noise_comp;
  if (a.noise_comp) {
    const auto r = parse_list(a.region, "--region");
    if (r.size() != 4) throw Error(ErrorCode::kConfiguration, "--region needs x,y,width,height");
    noise.region = {static_cast<std::size_t>(r[0]), static_cast<std::size_t>(r[1]),
                    static_cast<std::size_t>(r[2]), static_cast<std::size_t>(r[3])};
  }
  const auto warped = synth::warp_frames(src, plan, noise, cfg.seed);
  auto out = open_output(a.output_path);
  io::write_fseq(out, warped);
  return 0;
}

struct DetectArgs {
  std::string input;
  std::string output;
  std::string labels_path;
  std::string schedule_path;
  std::string model_path;
  std::string truth_path;
};

void write_labels(const std::string& path, const eval::LabeledTimeline& tl, const PipelineConfig& cfg) {
  auto out = open_output(path);
  out << "# " << config_comment(cfg) << '\n';
  out << "time_s,label\n";
  for (std::size_t j = 0; j < tl.size(); ++j) {
    out << io::format_double(tl.time_at(j)) << ',' << (tl[j] ? 1 : 0) << '\n';
  }
}

int cmd_detect(const PipelineConfig& cfg, const DetectArgs& a) {
  const std::string& input = a.input;
  const std::string& output = a.output;
  auto in = open_input(input);
  const auto record = io::read_pneumogram_csv(in);
  const auto window = signal::WindowConfig::from_seconds(cfg.window_s, cfg.overlap, record.sample_rate());
  eval::DetectorOptions options;
  options.eta_uv = cfg.eta_uv;
  options.band = {cfg.r_low_hz, cfg.r_high_hz};
  options.amp_threshold = cfg.amp_threshold;
  const auto det = eval::reference_apnea_detector(record, window, options);
  auto out = open_output(output);
  out << "# " << config_comment(cfg) << '\n';
  out << "# amp_threshold=" << io::format_double(det.threshold) << '\n';
  out << "time_s,score\n";
  for (std::size_t j = 0; j < det.amplitude.size(); ++j) {
    out << io::format_double(det.labels.time_at(j)) << ',' << io::format_double(det.amplitude[j]) << '\n';
  }
  if (!a.labels_path.empty()) write_labels(a.labels_path, det.labels, cfg);
  if (!a.truth_path.empty()) {
    auto sched_in = open_input(a.schedule_path);
    const auto schedule = io::read_schedule_csv(sched_in);
    const auto model = load_model(a.model_path);
    const auto truth = eval::apnea_truth(schedule, model.state_space, det.labels.step_s(),
                                         det.labels.origin_s(), det.labels.size());
    write_labels(a.truth_path, truth, cfg);
  }
  return 0;
}

eval::LabeledTimeline to_timeline(const io::TimeSeries& ts) {
  std::vector<std::uint8_t> labels;
  for (double v : ts.values) {
    if (v != 0.0 && v != 1.0) throw Error(ErrorCode::kParse, "labels must be 0 or 1");
    labels.push_back(v != 0.0 ? 1 : 0);
  }
  const double step = ts.times.size() >= 2
                          ? (ts.times.back() - ts.times.front()) / static_cast<double>(ts.times.size() - 1)
                          : 1.0;
  return eval::LabeledTimeline(std::move(labels), step, ts.times.front());
}

json metrics_json(const eval::ConfusionTimes& ct) {
  const auto m = eval::sens_spec_dor(ct);
  return {{"T_TP", {{"value", ct.tp_s}, {"unit", "s"}}},
          {"T_TN", {{"value", ct.tn_s}, {"unit", "s"}}},
          {"T_FP", {{"value", ct.fp_s}, {"unit", "s"}}},
          {"T_FN", {{"value", ct.fn_s}, {"unit", "s"}}},
          {"sensitivity", {{"value", optional_json(m.sensitivity)}, {"unit", "fraction"}}},
          {"specificity", {{"value", optional_json(m.specificity)}, {"unit", "fraction"}}},
          {"dor", {{"value", optional_json(m.dor)}, {"unit", "ratio"}}}};
}

struct EvalArgs {
  std::string mode = "rr";
  std::string pred;
  std::string truth;
  std::string report;
  std::string roc_path;
  std::size_t thresholds = 100;
  bool low_is_positive = false;
  double tolerance = 0.15;
  std::vector<double> times;
  std::vector<double> rates;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  json report;
  report["mode"] = a.mode;
  if (a.mode == "rr") {
    auto pin = open_input(a.pred);
    auto tin = open_input(a.truth);
    const auto est = io::read_trajectory_csv(pin);
    const auto truth = io::read_trajectory_csv(tin);
    const auto acc = eval::rr_accuracy(est, truth, a.tolerance);
    report["metrics"] = {
        {"p_correct", {{"value", optional_json(acc.p_correct)}, {"unit", "fraction"}}},
        {"windows_correct", {{"value", acc.correct}, {"unit", "windows"}}},
        {"windows_scored", {{"value", acc.scored}, {"unit", "windows"}}},
        {"rmse", {{"value", acc.rmse_hz}, {"unit", "Hz"}}},
        {"normalized_rmse", {{"value", optional_json(acc.normalized_rmse)}, {"unit", "fraction"}}},
        {"tolerance_fraction", {{"value", a.tolerance}, {"unit", "fraction"}}}};
  } else if (a.mode == "detect") {
    auto pin = open_input(a.pred);
    auto tin = open_input(a.truth);
    const auto pred = io::read_time_series_csv(pin);
    const auto truth = to_timeline(io::read_time_series_csv(tin));
    if (pred.value_name == "label") {
      report["metrics"] = metrics_json(eval::confusion_times(to_timeline(pred), truth));
    } else {
      std::vector<double> scores = pred.values;
      if (a.low_is_positive) for (double& s : scores) s = -s;
      const auto thresholds = eval::even_thresholds(scores, a.thresholds);
      const auto curve = eval::roc(scores, truth, thresholds);
      std::vector<std::uint8_t> labels;
      for (double s : scores) labels.push_back(s >= curve.optimum_threshold ? 1 : 0);
      const eval::LabeledTimeline predicted(std::move(labels), truth.step_s(), truth.origin_s());
      report["metrics"] = metrics_json(eval::confusion_times(predicted, truth));
      const double thr = a.low_is_positive ? -curve.optimum_threshold : curve.optimum_threshold;
      report["metrics"]["auc"] = {{"value", curve.auc}, {"unit", "fraction"}};
      report["metrics"]["optimum_threshold"] = {{"value", thr}, {"unit", "score"}};
      if (!a.roc_path.empty()) {
        std::vector<double> t, f, p;
        for (const auto& pt : curve.points) {
          t.push_back(a.low_is_positive ? -pt.threshold : pt.threshold);
          f.push_back(pt.fpr);
          p.push_back(pt.tpr);
        }
        auto roc_out = open_output(a.roc_path);
        io::write_roc_csv(roc_out, t, f, p);
      }
    }
  } else if (a.mode == "times") {
    if (a.times.size() != 4) throw Error(ErrorCode::kConfiguration, "--times needs TP,TN,FP,FN seconds");
    report["metrics"] = metrics_json({a.times[0], a.times[1], a.times[2], a.times[3]});
  } else if (a.mode == "rates") {
    if (a.rates.size() != 2) throw Error(ErrorCode::kConfiguration, "--rates needs sensitivity,specificity");
    report["metrics"] = {
        {"sensitivity", {{"value", a.rates[0]}, {"unit", "fraction"}}},
        {"specificity", {{"value", a.rates[1]}, {"unit", "fraction"}}},
        {"dor", {{"value", optional_json(eval::dor_from_rates(a.rates[0], a.rates[1]))}, {"unit", "ratio"}}}};
  } else {
    throw Error(ErrorCode::kConfiguration, "unknown eval mode '" + a.mode + "'");
  }
  const std::string text = report.dump(2) + "\n";
  if (a.report.empty()) {
    out << text;
  } else {
    auto f = open_output(a.report);
    f << text;
  }
  return 0;
}

int cmd_kl(const std::string& p_text, const std::string& q_text, const std::string& model_path,
           const std::string& traj_path, std::ostream& out) {
  std::vector<double> p, q;
  if (!model_path.empty()) {
    const auto model = load_model(model_path);
    auto in = open_input(traj_path);
    const auto traj = io::read_trajectory_csv(in);
    p = eval::occupancy_pmf(quantizer::quantize(traj, model.state_space));
    q = model.pi.empty() ? std::vector<double>(ctmc::stationary(model.generator).values().begin(),
                                               ctmc::stationary(model.generator).values().end())
                         : model.pi;
  } else {
    p = parse_list(p_text, "--p");
    q = parse_list(q_text, "--q");
  }
  const double bits = eval::kl_divergence(p, q);
  out << json{{"kl_divergence", {{"value", bits}, {"unit", "bits"}}}}.dump(2) << '\n';
  return 0;
}

}  // namespace

json PipelineConfig::to_json() const {
  return {{"window_s", window_s},
          {"overlap", overlap},
          {"r_low_hz", r_low_hz},
          {"r_high_hz", r_high_hz},
          {"r_movement_hz", r_movement_hz},
          {"eta_uv", eta_uv},
          {"apnea_rate_hz", apnea_rate_hz},
          {"amp_threshold", optional_json(amp_threshold)},
          {"n_states", n_states},
          {"apnea", apnea},
          {"movement", movement},
          {"seed", seed}};
}

void PipelineConfig::merge_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "window_s") window_s = value.get<double>();
      else if (key == "overlap") overlap = value.get<double>();
      else if (key == "r_low_hz") r_low_hz = value.get<double>();
      else if (key == "r_high_hz") r_high_hz = value.get<double>();
      else if (key == "r_movement_hz") r_movement_hz = value.get<double>();
      else if (key == "eta_uv") eta_uv = value.get<double>();
      else if (key == "apnea_rate_hz") apnea_rate_hz = value.get<double>();
      else if (key == "amp_threshold") amp_threshold = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "n_states") n_states = value.get<std::size_t>();
      else if (key == "apnea") apnea = value.get<bool>();
      else if (key == "movement") movement = value.get<bool>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else throw Error(ErrorCode::kConfiguration, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
}

void PipelineConfig::validate() const {
  if (!(window_s > 0.0)) throw Error(ErrorCode::kConfiguration, "window_s must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorCode::kConfiguration, "overlap must lie in [0, 1)");
  if (!(r_low_hz > 0.0 && r_low_hz < r_high_hz && r_high_hz < r_movement_hz)) {
    throw Error(ErrorCode::kConfiguration, "need 0 < r_low_hz < r_high_hz < r_movement_hz");
  }
  if (!(eta_uv > 0.0)) throw Error(ErrorCode::kConfiguration, "eta_uv must be positive");
  if (!(apnea_rate_hz > 0.0 && apnea_rate_hz < r_low_hz)) {
    throw Error(ErrorCode::kConfiguration, "apnea_rate_hz must lie in (0, r_low_hz)");
  }
  if (amp_threshold && !(*amp_threshold >= 0.0)) {
    throw Error(ErrorCode::kConfiguration, "amp_threshold must be non-negative");
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Breathing-pattern CTMC toolkit"};
  app.require_subcommand(1);

  auto* estimate = app.add_subcommand("estimate-rr", "Estimate a respiratory-rate trajectory from a pneumogram CSV");
  CommonOptions est_common;
  std::string est_in, est_out;
  std::optional<double> est_amp;
  est_common.attach(*estimate);
  estimate->add_option("--input,-i", est_in, "Pneumogram CSV")->required();
  estimate->add_option("--output,-o", est_out, "Trajectory CSV")->required();
  estimate->add_option("--amp-threshold", est_amp, "Apnea amplitude threshold (default: 0.1 x median)");

  auto* fit = app.add_subcommand("fit", "Fit a CTMC model to a trajectory CSV");
  CommonOptions fit_common;
  std::string fit_in, fit_out;
  bool fit_no_apnea = false, fit_no_movement = false, fit_partial = false;
  fit_common.attach(*fit);
  fit->add_option("--input,-i", fit_in, "Trajectory CSV")->required();
  fit->add_option("--output,-o", fit_out, "Model JSON")->required();
  fit->add_flag("--no-apnea", fit_no_apnea, "Do not reserve the apnea state");
  fit->add_flag("--no-movement", fit_no_movement, "Do not reserve the movement state");
  fit->add_flag("--allow-partial", fit_partial, "Tolerate states never visited");

  auto* simulate = app.add_subcommand("simulate", "Simulate a sojourn schedule from a model");
  std::string sim_model, sim_out;
  double sim_duration = 0.0;
  std::uint64_t sim_seed = 1;
  bool sim_strip = false;
  simulate->add_option("--model,-m", sim_model, "Model JSON")->required();
  simulate->add_option("--duration", sim_duration, "Duration in seconds")->required();
  simulate->add_option("--seed", sim_seed, "Random seed");
  simulate->add_flag("--strip-movement", sim_strip, "Remove the movement state first");
  simulate->add_option("--output,-o", sim_out, "Schedule CSV")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Render a schedule as a motion signal or warped frames");
  CommonOptions syn_common;
  SynthArgs syn;
  syn_common.attach(*synth_cmd);
  synth_cmd->add_option("--schedule", syn.schedule_path, "Schedule CSV")->required();
  synth_cmd->add_option("--model,-m", syn.model_path, "Model JSON")->required();
  auto* sig_opt = synth_cmd->add_option("--signal", syn.signal_path, "Write a pneumogram CSV here");
  auto* frm_opt = synth_cmd->add_option("--frames", syn.frames_path, "Source FSEQ to warp");
  sig_opt->excludes(frm_opt);
  synth_cmd->add_option("--output,-o", syn.output_path, "Warped FSEQ output")->needs(frm_opt);
  synth_cmd->add_option("--fs", syn.fs, "Signal sample rate (Hz)");
  synth_cmd->add_option("--amplitude", syn.amplitude, "Signal amplitude (uV)");
  synth_cmd->add_option("--noise-sigma", syn.noise_sigma, "Additive noise std (uV)");
  synth_cmd->add_flag("--breathe-apnea", syn.breathe_apnea, "Breathe at --apnea-rate during apnea");
  synth_cmd->add_option("--video-rate", syn.video_rate, "Breathing rate of the source video (Hz)");
  synth_cmd->add_flag("--cv-scale", syn.cv_scale, "Play the longest-sojourn state at native speed");
  synth_cmd->add_flag("--noise-comp", syn.noise_comp, "Add high-pass compensation noise to stretched blocks");
  synth_cmd->add_option("--region", syn.region, "Static region x,y,width,height for noise estimation");

  auto* detect = app.add_subcommand("detect", "Score windows of a pneumogram with the reference apnea detector");
  CommonOptions det_common;
  DetectArgs det;
  std::optional<double> det_amp;
  det_common.attach(*detect);
  detect->add_option("--input,-i", det.input, "Pneumogram CSV")->required();
  detect->add_option("--output,-o", det.output, "Score timeline CSV (amplitude per window)")->required();
  detect->add_option("--amp-threshold", det_amp, "Amplitude threshold (default: 0.5 x median)");
  detect->add_option("--labels", det.labels_path, "Write the detector's label timeline here");
  auto* det_sched = detect->add_option("--schedule", det.schedule_path, "Schedule CSV for reference labels");
  auto* det_model = detect->add_option("--model,-m", det.model_path, "Model JSON for reference labels");
  detect->add_option("--truth", det.truth_path, "Write reference apnea labels here")
      ->needs(det_sched)
      ->needs(det_model);

  auto* evaluate = app.add_subcommand("eval", "Score an estimator or detector");
  EvalArgs ev;
  evaluate->add_option("--mode", ev.mode, "rr | detect | times | rates")
      ->check(CLI::IsMember({"rr", "detect", "times", "rates"}));
  evaluate->add_option("--pred", ev.pred, "Predicted trajectory or timeline CSV");
  evaluate->add_option("--truth", ev.truth, "Reference trajectory or label timeline CSV");
  evaluate->add_option("--report", ev.report, "Report JSON (default: stdout)");
  evaluate->add_option("--roc", ev.roc_path, "ROC curve CSV");
  evaluate->add_option("--thresholds", ev.thresholds, "Number of thresholds in the sweep");
  evaluate->add_flag("--low-is-positive", ev.low_is_positive, "Low scores indicate apnea");
  evaluate->add_option("--tolerance", ev.tolerance, "Relative tolerance for a correct RR");
  evaluate->add_option("--times", ev.times, "T_TP,T_TN,T_FP,T_FN in seconds")->delimiter(',');
  evaluate->add_option("--rates", ev.rates, "sensitivity,specificity")->delimiter(',');

  auto* kl = app.add_subcommand("kl", "KL divergence between PMFs, or trajectory occupancy vs. model");
  std::string kl_p, kl_q, kl_model, kl_traj;
  kl->add_option("--p", kl_p, "Comma-separated PMF p");
  kl->add_option("--q", kl_q, "Comma-separated PMF q");
  kl->add_option("--model,-m", kl_model, "Model JSON (q = its stationary distribution)");
  kl->add_option("--trajectory", kl_traj, "Trajectory CSV (p = its occupancy)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (estimate->parsed()) return cmd_estimate_rr(est_common.resolve(est_amp), est_in, est_out);
    if (fit->parsed()) {
      if (fit_no_apnea) fit_common.config.apnea = false;
      if (fit_no_movement) fit_common.config.movement = false;
      return cmd_fit(fit_common.resolve(std::nullopt), fit_in, fit_out, fit_partial);
    }
    if (simulate->parsed()) return cmd_simulate(sim_model, sim_duration, sim_seed, sim_strip, sim_out);
    if (synth_cmd->parsed()) {
      if (syn.signal_path.empty() && (syn.frames_path.empty() || syn.output_path.empty())) {
        throw Error(ErrorCode::kConfiguration, "synth needs --signal <out> or --frames <src> --output <out>");
      }
      return cmd_synth(syn_common.resolve(std::nullopt), syn);
    }
    if (detect->parsed()) return cmd_detect(det_common.resolve(det_amp), det);
    if (evaluate->parsed()) return cmd_eval(ev, out);
    if (kl->parsed()) {
      const bool pmfs = !kl_p.empty() && !kl_q.empty();
      const bool model = !kl_model.empty() && !kl_traj.empty();
      if (pmfs == model) throw Error(ErrorCode::kConfiguration, "kl needs --p/--q or --model/--trajectory");
      return cmd_kl(kl_p, kl_q, kl_model, kl_traj, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace breathsim::cli
