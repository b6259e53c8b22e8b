#include "breathsim/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "breathsim/error.hpp"

namespace breathsim::io {

namespace {

using nlohmann::json;

struct CsvLine {
  std::size_t number;
  std::string text;
};

// Splits the stream into `#` comments and data lines (blank lines dropped).
struct CsvDocument {
  std::vector<std::string> comments;
  std::vector<CsvLine> lines;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

CsvDocument read_document(std::istream& in) {
  CsvDocument doc;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      doc.comments.push_back(trim(t.substr(1)));
    } else {
      doc.lines.push_back({number, t});
    }
  }
  return doc;
}

std::optional<std::string> comment_value(const CsvDocument& doc, const std::string& key) {
  const std::string prefix = key + "=";
  for (const auto& c : doc.comments) {
    if (c.rfind(prefix, 0) == 0) return trim(c.substr(prefix.size()));
  }
  return std::nullopt;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(s);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::vector<double> parse_row(const CsvLine& line, std::size_t columns) {
  const auto fields = split(line.text, ',');
  if (fields.size() != columns) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line.number) + ": expected " +
                                       std::to_string(columns) + " fields, got " +
                                       std::to_string(fields.size()));
  }
  std::vector<double> out;
  out.reserve(columns);
  for (const auto& f : fields) out.push_back(parse_double(f, "line " + std::to_string(line.number)));
  return out;
}

void expect_header(const CsvDocument& doc, const std::string& header) {
  if (doc.lines.empty() || doc.lines.front().text != header) {
    throw Error(ErrorCode::kParse, "expected header '" + header + "'");
  }
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorCode::kInvalidInput, "cannot format number");
  return std::string(buf.data(), end);
}

double parse_double(const std::string& token, const std::string& context) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (token.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::kParse, context + ": '" + token + "' is not a finite number");
  }
  return value;
}

signal::PneumogramRecord read_pneumogram_csv(std::istream& in) {
  const auto doc = read_document(in);
  if (doc.lines.empty()) throw Error(ErrorCode::kInsufficientData, "pneumogram file has no samples");

  if (const auto fs_text = comment_value(doc, "fs_hz")) {
    const double fs = parse_double(*fs_text, "fs_hz comment");
    std::vector<double> samples;
    std::size_t first = 0;
    if (doc.lines.front().text == "value_uV") first = 1;
    for (std::size_t i = first; i < doc.lines.size(); ++i) samples.push_back(parse_row(doc.lines[i], 1)[0]);
    if (samples.empty()) throw Error(ErrorCode::kInsufficientData, "pneumogram file has no samples");
    return signal::PneumogramRecord(std::move(samples), fs);
  }

  expect_header(doc, "time_s,value_uV");
  std::vector<double> times, samples;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto row = parse_row(doc.lines[i], 2);
    times.push_back(row[0]);
    samples.push_back(row[1]);
  }
  if (samples.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "need at least two rows to infer the sample rate");
  }
  const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  if (!(step > 0.0)) throw Error(ErrorCode::kParse, "time column must increase");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double d = times[i] - times[i - 1];
    if (!(d > 0.0) || std::abs(d - step) > 1e-6 * step) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(doc.lines[i + 1].number) +
                                         ": time step is not uniform");
    }
  }
  return signal::PneumogramRecord(std::move(samples), 1.0 / step);
}

void write_pneumogram_csv(std::ostream& out, const signal::PneumogramRecord& record,
                          const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "time_s,value_uV\n";
  const auto samples = record.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << format_double(static_cast<double>(i) / record.sample_rate()) << ','
        << format_double(samples[i]) << '\n';
  }
}

signal::RrTrajectory read_trajectory_csv(std::istream& in) {
  const auto doc = read_document(in);
  if (doc.lines.empty()) throw Error(ErrorCode::kInsufficientData, "trajectory file is empty");
  expect_header(doc, "time_s,rr_hz");
  signal::RrTrajectory traj;
  std::vector<double> times;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto row = parse_row(doc.lines[i], 2);
    times.push_back(row[0]);
    traj.values.push_back(row[1]);
  }
  if (traj.values.empty()) throw Error(ErrorCode::kInsufficientData, "trajectory has no rows");
  if (const auto step = comment_value(doc, "window_step_s")) {
    traj.window_step_s = parse_double(*step, "window_step_s comment");
  } else if (times.size() >= 2) {
    traj.window_step_s = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  } else {
    throw Error(ErrorCode::kInsufficientData, "cannot infer the window step from one row");
  }
  if (const auto origin = comment_value(doc, "origin_time_s")) {
    traj.origin_time_s = parse_double(*origin, "origin_time_s comment");
  } else {
    traj.origin_time_s = times.front();
  }
  if (!(traj.window_step_s > 0.0)) throw Error(ErrorCode::kParse, "window step must be positive");
  return traj;
}

void write_trajectory_csv(std::ostream& out, const signal::RrTrajectory& traj,
                          const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "# window_step_s=" << format_double(traj.window_step_s) << '\n';
  out << "# origin_time_s=" << format_double(traj.origin_time_s) << '\n';
  out << "time_s,rr_hz\n";
  for (std::size_t j = 0; j < traj.size(); ++j) {
    out << format_double(traj.time_at(j)) << ',' << format_double(traj.values[j]) << '\n';
  }
}

ctmc::SojournSchedule read_schedule_csv(std::istream& in) {
  const auto doc = read_document(in);
  if (doc.lines.empty()) throw Error(ErrorCode::kInsufficientData, "schedule file is empty");
  expect_header(doc, "state_index,rate_hz,sojourn_s,jump_time_s");
  std::uint64_t seed = 0;
  if (const auto s = comment_value(doc, "seed")) {
    const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), seed);
    if (ec != std::errc() || ptr != s->data() + s->size()) throw Error(ErrorCode::kParse, "bad seed comment");
  }
  std::vector<ctmc::Sojourn> sojourns;
  std::vector<double> jumps;
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto row = parse_row(doc.lines[i], 4);
    if (row[0] < 0.0 || row[0] != std::floor(row[0])) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(doc.lines[i].number) + ": bad state index");
    }
    sojourns.push_back({static_cast<std::size_t>(row[0]), row[2]});
    jumps.push_back(row[3]);
  }
  ctmc::SojournSchedule schedule(std::move(sojourns), seed);
  const auto computed = schedule.jump_times();
  for (std::size_t l = 0; l < jumps.size(); ++l) {
    if (std::abs(computed[l] - jumps[l]) > 1e-6 * std::max(1.0, jumps[l])) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(doc.lines[l + 1].number) +
                                         ": jump time disagrees with the sojourn sum");
    }
  }
  return schedule;
}

void write_schedule_csv(std::ostream& out, const ctmc::SojournSchedule& schedule,
                        const quantizer::StateSpace& ss) {
  out << "# seed=" << schedule.seed() << '\n';
  out << "# duration_s=" << format_double(schedule.total_duration_s()) << '\n';
  out << "state_index,rate_hz,sojourn_s,jump_time_s\n";
  const auto sojourns = schedule.sojourns();
  const auto jumps = schedule.jump_times();
  for (std::size_t l = 0; l < sojourns.size(); ++l) {
    out << sojourns[l].state << ',' << format_double(ss.rate(sojourns[l].state)) << ','
        << format_double(sojourns[l].duration_s) << ',' << format_double(jumps[l]) << '\n';
  }
}

std::string model_to_json(const Model& model) {
  json j;
  j["rates_hz"] = std::vector<double>(model.state_space.rates().begin(), model.state_space.rates().end());
  j["has_apnea"] = model.state_space.has_apnea();
  j["has_movement"] = model.state_space.has_movement();
  j["bounds_hz"] = {{"low", model.state_space.bounds().low_hz},
                    {"high", model.state_space.bounds().high_hz},
                    {"movement", model.state_space.bounds().movement_hz}};
  j["lambda_per_s"] = model.generator.rows();
  j["pi"] = model.pi;
  json meta;
  meta["source"] = model.meta.source;
  meta["fit_step_s"] = model.meta.fit_step_s ? json(*model.meta.fit_step_s) : json(nullptr);
  meta["seed"] = model.meta.seed ? json(*model.meta.seed) : json(nullptr);
  j["meta"] = meta;
  return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model JSON: ") + e.what());
  }
  try {
    auto rates = j.at("rates_hz").get<std::vector<double>>();
    const bool has_apnea = j.at("has_apnea").get<bool>();
    const bool has_movement = j.at("has_movement").get<bool>();
    quantizer::RateBounds bounds = quantizer::RateBounds::newborn();
    if (j.contains("bounds_hz")) {
      const auto& b = j.at("bounds_hz");
      bounds = {b.at("low").get<double>(), b.at("high").get<double>(), b.at("movement").get<double>()};
    } else if (has_movement && !rates.empty()) {
      bounds.movement_hz = rates.back();
    }
    quantizer::StateSpace ss(std::move(rates), has_apnea, has_movement, bounds);
    auto generator = ctmc::GeneratorMatrix::from_rows(
        j.at("lambda_per_s").get<std::vector<std::vector<double>>>(), kModelRowSumTolerance);
    if (generator.size() != ss.size()) {
      throw Error(ErrorCode::kConsistency, "generator size differs from the rate count");
    }
    std::vector<double> pi;
    if (j.contains("pi") && !j.at("pi").is_null()) pi = j.at("pi").get<std::vector<double>>();
    ModelMeta meta;
    if (j.contains("meta")) {
      const auto& m = j.at("meta");
      if (m.contains("source") && m.at("source").is_string()) meta.source = m.at("source").get<std::string>();
      if (m.contains("fit_step_s") && m.at("fit_step_s").is_number()) meta.fit_step_s = m.at("fit_step_s").get<double>();
      if (m.contains("seed") && m.at("seed").is_number_unsigned()) meta.seed = m.at("seed").get<std::uint64_t>();
    }
    return Model{std::move(ss), std::move(generator), std::move(pi), std::move(meta)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model JSON: ") + e.what());
  }
}

TimeSeries read_time_series_csv(std::istream& in) {
  const auto doc = read_document(in);
  if (doc.lines.empty()) throw Error(ErrorCode::kInsufficientData, "timeline file is empty");
  const auto header = split(doc.lines.front().text, ',');
  if (header.size() != 2 || header[0] != "time_s") {
    throw Error(ErrorCode::kParse, "expected header 'time_s,<column>'");
  }
  TimeSeries ts;
  ts.value_name = header[1];
  for (std::size_t i = 1; i < doc.lines.size(); ++i) {
    const auto row = parse_row(doc.lines[i], 2);
    ts.times.push_back(row[0]);
    ts.values.push_back(row[1]);
  }
  if (ts.values.empty()) throw Error(ErrorCode::kInsufficientData, "timeline has no rows");
  return ts;
}

void write_roc_csv(std::ostream& out, const std::vector<double>& thresholds,
                   const std::vector<double>& fpr, const std::vector<double>& tpr) {
  out << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    out << format_double(thresholds[i]) << ',' << format_double(fpr[i]) << ',' << format_double(tpr[i]) << '\n';
  }
}

synth::FrameSequence read_fseq(std::istream& in) {
  std::string magic, dims;
  if (!std::getline(in, magic) || magic != "FSEQ 1") throw Error(ErrorCode::kParse, "missing 'FSEQ 1' header");
  if (!std::getline(in, dims)) throw Error(ErrorCode::kParse, "missing FSEQ dimension line");

  std::optional<std::size_t> frames, height, width;
  std::optional<double> fps;
  std::string dtype;
  for (const auto& token : split(dims, ' ')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, "bad FSEQ field '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    auto as_size = [&](const std::string& v) {
      std::size_t out = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw Error(ErrorCode::kParse, "bad FSEQ " + key);
      return out;
    };
    if (key == "frames") frames = as_size(value);
    else if (key == "height") height = as_size(value);
    else if (key == "width") width = as_size(value);
    else if (key == "fps") fps = parse_double(value, "FSEQ fps");
    else if (key == "dtype") dtype = value;
    else throw Error(ErrorCode::kParse, "unknown FSEQ field '" + key + "'");
  }
  if (!frames || !height || !width || !fps || dtype != "f32") {
    throw Error(ErrorCode::kParse, "FSEQ header needs frames, height, width, fps and dtype=f32");
  }

  const std::size_t count = *frames * *height * *width;
  std::vector<float> pixels(count);
  std::vector<char> raw(count * 4);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw Error(ErrorCode::kParse, "FSEQ payload is truncated");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(raw[i * 4 + static_cast<std::size_t>(b)]);
    pixels[i] = std::bit_cast<float>(bits);
  }
  return synth::FrameSequence(*frames, *height, *width, *fps, std::move(pixels));
}

void write_fseq(std::ostream& out, const synth::FrameSequence& frames) {
  out << "FSEQ 1\n"
      << "frames=" << frames.frames() << " height=" << frames.height() << " width=" << frames.width()
      << " fps=" << format_double(frames.fps()) << " dtype=f32\n";
  std::vector<char> raw(frames.data().size() * 4);
  for (std::size_t i = 0; i < frames.data().size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(frames.data()[i]);
    for (std::size_t b = 0; b < 4; ++b) {
      raw[i * 4 + b] = static_cast<char>(bits & 0xffu);
      bits >>= 8;
    }
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

}  // namespace breathsim::io
