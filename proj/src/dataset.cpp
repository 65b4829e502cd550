#include "flow/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "flow/error.hpp"

namespace flow {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& key) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorKind::Config, "dataset spec: bad value '" + s + "' for " + key);
  return v;
}

std::array<int, 3> parse_triplet(const std::string& s, const std::string& key) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) fail(ErrorKind::Config, "dataset spec: expected 3 columns for " + key);
  return {parse_number<int>(parts[0], key), parse_number<int>(parts[1], key),
          parse_number<int>(parts[2], key)};
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(ErrorKind::Config, "dataset spec: bad boolean '" + s + "' for " + key);
}

std::string join_triplet(const std::array<int, 3>& t) {
  return std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]);
}

std::vector<std::string> tokenize_row(std::string_view line, Delimiter d) {
  return d == Delimiter::Comma ? split(line, ',') : split_ws(line);
}

double parse_cell(const std::string& tok, std::size_t line_no, int column) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  if (!tok.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (tok.empty() || ec != std::errc() || ptr != end)
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ", column " + std::to_string(column) +
                               ": cannot parse '" + tok + "'");
  return v;
}

int subject_from_filename(const std::filesystem::path& path) {
  static const std::regex digits("[0-9]+");
  const std::string stem = path.stem().string();
  std::smatch m;
  if (!std::regex_search(stem, m, digits))
    fail(ErrorKind::SpecMismatch, "cannot derive subject id from file name " + path.string());
  return std::stoi(m.str());
}

Vec3 read_triplet(const std::vector<double>& row, const std::array<int, 3>& cols, double scale) {
  return {row[cols[0]] * scale, row[cols[1]] * scale, row[cols[2]] * scale};
}

}  // namespace

int DatasetSpec::max_column() const {
  int hi = std::max({timestamp_column, label_column, subject_column});
  for (const auto& s : sensors)
    for (const auto* t : {&s.accel, &s.gyro, &s.mag})
      hi = std::max(hi, *std::max_element(t->begin(), t->end()));
  return hi;
}

void DatasetSpec::validate() const {
  if (sensors.empty()) fail(ErrorKind::Config, "dataset spec '" + name + "': no sensors");
  if (!(native_rate_hz > 0.0)) fail(ErrorKind::Config, "dataset spec: native_rate_hz must be > 0");
  if (decimation < 1) fail(ErrorKind::Config, "dataset spec: decimation must be >= 1");
  for (double scale : {accel_scale, gyro_scale, timestamp_scale})
    if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::Config, "dataset spec: scales must be finite and > 0");
  if (num_classes < 1) fail(ErrorKind::Config, "dataset spec: num_classes must be >= 1");
  if (label_column < 0) fail(ErrorKind::Config, "dataset spec: label_column is required");

  std::set<int> used;
  auto claim = [&](int c) {
    if (c < 0) fail(ErrorKind::Config, "dataset spec: negative column index");
    if (!used.insert(c).second)
      fail(ErrorKind::Config, "dataset spec: column " + std::to_string(c) + " used twice");
  };
  claim(label_column);
  if (timestamp_column >= 0) claim(timestamp_column);
  if (subject_column >= 0) claim(subject_column);
  for (const auto& s : sensors)
    for (const auto* t : {&s.accel, &s.gyro, &s.mag})
      for (int c : *t) claim(c);

  std::set<int> classes;
  for (const auto& [raw, cls] : label_map) {
    if (cls < 0 || cls >= num_classes)
      fail(ErrorKind::Config, "dataset spec: label " + std::to_string(raw) + " maps outside [0, num_classes)");
    if (!classes.insert(cls).second)
      fail(ErrorKind::Config, "dataset spec: label map is not injective at class " + std::to_string(cls));
  }
  if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes)
    fail(ErrorKind::Config, "dataset spec: class_names must list num_classes names");
  if (header && !columns.empty() && static_cast<int>(columns.size()) <= max_column())
    fail(ErrorKind::Config, "dataset spec: columns list shorter than the referenced indices");
}

DatasetSpec DatasetSpec::parse(const std::string& text) {
  DatasetSpec spec;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "dataset spec line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));

    if (key == "name") {
      spec.name = value;
    } else if (key == "delimiter") {
      if (value == "whitespace") spec.delimiter = Delimiter::Whitespace;
      else if (value == "comma") spec.delimiter = Delimiter::Comma;
      else fail(ErrorKind::Config, "dataset spec: unknown delimiter '" + value + "'");
    } else if (key == "header") {
      spec.header = parse_bool(value, key);
    } else if (key == "columns") {
      spec.columns = split(value, ',');
    } else if (key == "timestamp_column") {
      spec.timestamp_column = parse_number<int>(value, key);
    } else if (key == "label_column") {
      spec.label_column = parse_number<int>(value, key);
    } else if (key == "subject") {
      if (value == "filename") spec.subject_column = -1;
      else if (value.starts_with("column:")) spec.subject_column = parse_number<int>(value.substr(7), key);
      else fail(ErrorKind::Config, "dataset spec: subject must be 'filename' or 'column:<i>'");
    } else if (key == "native_rate_hz") {
      spec.native_rate_hz = parse_number<double>(value, key);
    } else if (key == "decimation") {
      spec.decimation = parse_number<int>(value, key);
    } else if (key == "gyro_unit") {
      if (value == "rad/s") spec.gyro_unit = GyroUnit::RadPerSec;
      else if (value == "deg/s") spec.gyro_unit = GyroUnit::DegPerSec;
      else fail(ErrorKind::Config, "dataset spec: gyro_unit must be rad/s or deg/s");
    } else if (key == "accel_scale") {
      spec.accel_scale = parse_number<double>(value, key);
    } else if (key == "gyro_scale") {
      spec.gyro_scale = parse_number<double>(value, key);
    } else if (key == "timestamp_scale") {
      spec.timestamp_scale = parse_number<double>(value, key);
    } else if (key == "num_classes") {
      spec.num_classes = parse_number<int>(value, key);
    } else if (key == "labels") {
      for (const auto& pair : split_ws(value)) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) fail(ErrorKind::Config, "dataset spec: label pair '" + pair + "' lacks ':'");
        const long raw = parse_number<long>(pair.substr(0, colon), key);
        if (!spec.label_map.emplace(raw, parse_number<int>(pair.substr(colon + 1), key)).second)
          fail(ErrorKind::Config, "dataset spec: raw label " + std::to_string(raw) + " mapped twice");
      }
    } else if (key == "class_names") {
      spec.class_names = split(value, ',');
    } else if (key == "max_gap") {
      spec.max_gap = parse_number<std::size_t>(value, key);
    } else if (key == "default_granularity") {
      spec.default_granularity = value;
    } else if (key == "sensor") {
      const auto parts = split_ws(value);
      if (parts.size() != 4)
        fail(ErrorKind::Config, "dataset spec: sensor needs '<name> accel gyro mag' column triplets");
      spec.sensors.push_back({parts[0], parse_triplet(parts[1], key), parse_triplet(parts[2], key),
                              parse_triplet(parts[3], key)});
    } else {
      fail(ErrorKind::Config, "dataset spec: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

DatasetSpec DatasetSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open dataset spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string DatasetSpec::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "name = " << name << '\n';
  out << "delimiter = " << (delimiter == Delimiter::Comma ? "comma" : "whitespace") << '\n';
  out << "header = " << (header ? "true" : "false") << '\n';
  if (!columns.empty()) {
    out << "columns = ";
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
  }
  out << "timestamp_column = " << timestamp_column << '\n';
  out << "label_column = " << label_column << '\n';
  out << "subject = " << (subject_column < 0 ? std::string("filename") : "column:" + std::to_string(subject_column)) << '\n';
  out << "native_rate_hz = " << native_rate_hz << '\n';
  out << "decimation = " << decimation << '\n';
  out << "gyro_unit = " << (gyro_unit == GyroUnit::DegPerSec ? "deg/s" : "rad/s") << '\n';
  out << "accel_scale = " << accel_scale << '\n';
  out << "gyro_scale = " << gyro_scale << '\n';
  out << "timestamp_scale = " << timestamp_scale << '\n';
  out << "num_classes = " << num_classes << '\n';
  out << "labels =";
  for (const auto& [raw, cls] : label_map) out << ' ' << raw << ':' << cls;
  out << '\n';
  if (!class_names.empty()) {
    out << "class_names = ";
    for (std::size_t i = 0; i < class_names.size(); ++i) out << (i ? "," : "") << class_names[i];
    out << '\n';
  }
  out << "max_gap = " << max_gap << '\n';
  out << "default_granularity = " << default_granularity << '\n';
  for (const auto& s : sensors)
    out << "sensor = " << s.name << ' ' << join_triplet(s.accel) << ' ' << join_triplet(s.gyro) << ' '
        << join_triplet(s.mag) << '\n';
  return out.str();
}

void Recording::validate() const {
  const std::size_t n = labels.size();
  if (raw_labels.size() != n || valid.size() != n || sensor_names.size() != sensors.size())
    fail(ErrorKind::InvalidInput, "recording: label/mask lengths disagree");
  for (const auto& s : sensors)
    if (s.size() != n) fail(ErrorKind::InvalidInput, "recording: sensor lengths disagree");
}

std::vector<Recording> load_recording(const std::filesystem::path& path, const DatasetSpec& spec) {
  spec.validate();
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open recording " + path.string());

  const double gyro_scale = spec.gyro_scale * (spec.gyro_unit == GyroUnit::DegPerSec ? std::numbers::pi / 180.0 : 1.0);
  const int needed = spec.max_column() + 1;
  const int file_subject = spec.subject_column < 0 ? subject_from_filename(path) : 0;

  std::vector<Recording> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = spec.header;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tokens = tokenize_row(line, spec.delimiter);
    if (header_pending) {
      header_pending = false;
      if (!spec.columns.empty()) {
        if (tokens.size() < spec.columns.size())
          fail(ErrorKind::SpecMismatch, path.string() + ": header has " + std::to_string(tokens.size()) +
                                            " columns, spec expects " + std::to_string(spec.columns.size()));
        for (std::size_t i = 0; i < spec.columns.size(); ++i)
          if (tokens[i] != spec.columns[i])
            fail(ErrorKind::SpecMismatch, path.string() + ": header column " + std::to_string(i) + " is '" +
                                              tokens[i] + "', spec expects '" + spec.columns[i] + "'");
      }
      continue;
    }
    if (static_cast<int>(tokens.size()) < needed)
      fail(ErrorKind::SpecMismatch, path.string() + " line " + std::to_string(line_no) + ": " +
                                        std::to_string(tokens.size()) + " columns, spec needs " +
                                        std::to_string(needed));
    row.assign(tokens.size(), 0.0);
    for (std::size_t c = 0; c < tokens.size(); ++c)
      row[c] = parse_cell(tokens[c], line_no, static_cast<int>(c));

    const double raw_label_value = row[spec.label_column];
    if (!std::isfinite(raw_label_value))
      fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": label is not a number");
    const long raw_label = std::lround(raw_label_value);
    const int subject =
        spec.subject_column < 0 ? file_subject : static_cast<int>(std::lround(row[spec.subject_column]));

    if (out.empty() || out.back().subject_id != subject) {
      Recording rec;
      rec.subject_id = subject;
      rec.session = path.stem().string();
      rec.sample_rate_hz = spec.native_rate_hz;
      rec.sensors.resize(spec.sensors.size());
      for (const auto& s : spec.sensors) rec.sensor_names.push_back(s.name);
      out.push_back(std::move(rec));
    }
    Recording& rec = out.back();
    const double ts = spec.timestamp_column >= 0 ? row[spec.timestamp_column] * spec.timestamp_scale
                                                 : static_cast<double>(rec.length()) / spec.native_rate_hz;
    for (std::size_t s = 0; s < spec.sensors.size(); ++s) {
      const auto& cols = spec.sensors[s];
      rec.sensors[s].push_back({read_triplet(row, cols.accel, spec.accel_scale),
                                read_triplet(row, cols.mag, 1.0), read_triplet(row, cols.gyro, gyro_scale), ts});
    }
    rec.raw_labels.push_back(raw_label);
    const auto it = spec.label_map.find(raw_label);
    rec.labels.push_back(it == spec.label_map.end() ? kIgnoredLabel : it->second);
    rec.valid.push_back(1);
  }
  if (header_pending && spec.header)
    fail(ErrorKind::SpecMismatch, path.string() + ": missing header row");
  return out;
}

bool interpolate_channel(std::span<double> values, std::size_t max_gap,
                         std::span<std::uint8_t> valid) {
  const std::size_t n = values.size();
  std::size_t first = n;
  for (std::size_t i = 0; i < n; ++i)
    if (std::isfinite(values[i])) {
      first = i;
      break;
    }
  if (first == n) return false;

  for (std::size_t i = 0; i < first; ++i) values[i] = values[first];
  std::size_t prev = first;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (!std::isfinite(values[i])) continue;
    const std::size_t gap = i - prev - 1;
    if (gap > 0) {
      const double a = values[prev];
      const double b = values[i];
      for (std::size_t j = prev + 1; j < i; ++j) {
        const double t = static_cast<double>(j - prev) / static_cast<double>(i - prev);
        values[j] = a + (b - a) * t;
        if (gap > max_gap) valid[j] = 0;
      }
    }
    prev = i;
  }
  for (std::size_t i = prev + 1; i < n; ++i) values[i] = values[prev];
  return true;
}

Recording interpolate_nans(const Recording& rec, std::size_t max_gap) {
  rec.validate();
  Recording out = rec;
  const std::size_t n = rec.length();
  std::vector<double> channel(n);
  for (std::size_t s = 0; s < out.sensors.size(); ++s) {
    auto& samples = out.sensors[s];
    for (int c = 0; c < kLocalChannels; ++c) {
      auto field = [c](LocalSample& x) -> double& {
        Vec3& v = c < 3 ? x.a : (c < 6 ? x.m : x.g);
        return c % 3 == 0 ? v.x : (c % 3 == 1 ? v.y : v.z);
      };
      bool any_missing = false;
      for (std::size_t i = 0; i < n; ++i) {
        channel[i] = field(samples[i]);
        any_missing |= !std::isfinite(channel[i]);
      }
      if (!any_missing) continue;
      if (!interpolate_channel(channel, max_gap, out.valid))
        fail(ErrorKind::ChannelUnusable, "subject " + std::to_string(rec.subject_id) + " sensor '" +
                                             rec.sensor_names[s] + "' channel " + std::to_string(c) +
                                             " has no valid samples");
      for (std::size_t i = 0; i < n; ++i) field(samples[i]) = channel[i];
    }
  }
  return out;
}

Recording decimate(const Recording& rec, int factor) {
  if (factor < 1) fail(ErrorKind::InvalidInput, "decimate: factor must be >= 1");
  rec.validate();
  if (factor == 1) return rec;
  Recording out;
  out.subject_id = rec.subject_id;
  out.session = rec.session;
  out.sample_rate_hz = rec.sample_rate_hz / factor;
  out.sensor_names = rec.sensor_names;
  out.sensors.resize(rec.sensors.size());
  for (std::size_t i = 0; i < rec.length(); i += static_cast<std::size_t>(factor)) {
    for (std::size_t s = 0; s < rec.sensors.size(); ++s) out.sensors[s].push_back(rec.sensors[s][i]);
    out.raw_labels.push_back(rec.raw_labels[i]);
    out.labels.push_back(rec.labels[i]);
    out.valid.push_back(rec.valid[i]);
  }
  return out;
}

int channels_per_sensor(ViewSet set) {
  switch (set) {
    case ViewSet::Local: return kLocalChannels;
    case ViewSet::Global: return GlobalSample::kChannels;
    case ViewSet::LocalGlobal: return kLocalChannels + GlobalSample::kChannels;
  }
  return 0;
}

ChannelSeries assemble_views(const Recording& rec, const MahonyParams& params, ViewSet set) {
  rec.validate();
  MahonyParams p = params;
  p.sample_rate_hz = rec.sample_rate_hz;

  std::vector<McResult> views;
  views.reserve(rec.num_sensors());
  for (const auto& sensor : rec.sensors) {
    if (set == ViewSet::Local) {
      // No filter needed; trim identically to keep windows aligned across arms.
      const std::size_t trim = warmup_samples(p);
      if (sensor.size() <= trim)
        fail(ErrorKind::InsufficientData, "recording shorter than the warm-up period");
      McResult r;
      r.trimmed = trim;
      r.local.assign(sensor.begin() + static_cast<std::ptrdiff_t>(trim), sensor.end());
      views.push_back(std::move(r));
    } else {
      views.push_back(mc_transform(sensor, p));
    }
  }

  ChannelSeries out;
  out.subject_id = rec.subject_id;
  const int per_sensor = channels_per_sensor(set);
  out.channels = per_sensor * static_cast<int>(rec.num_sensors());
  if (views.empty()) return out;
  const std::size_t trim = views.front().trimmed;
  const std::size_t n = rec.length() - trim;
  out.values.reserve(n * static_cast<std::size_t>(out.channels));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& v : views) {
      if (set != ViewSet::Global)
        for (double x : local_channels(v.local[i])) out.values.push_back(x);
      if (set != ViewSet::Local)
        for (double x : v.global[i].channels()) out.values.push_back(x);
    }
  }
  out.labels.assign(rec.labels.begin() + static_cast<std::ptrdiff_t>(trim), rec.labels.end());
  out.valid.assign(rec.valid.begin() + static_cast<std::ptrdiff_t>(trim), rec.valid.end());
  return out;
}

std::vector<Window> segment_windows(const ChannelSeries& series, const WindowParams& params) {
  if (params.length < 1 || params.stride < 1)
    fail(ErrorKind::InvalidInput, "segment_windows: length and stride must be >= 1");
  std::vector<Window> out;
  const std::size_t n = series.length();
  const auto len = static_cast<std::size_t>(params.length);
  if (len > n) return out;

  std::map<int, int> counts;
  for (std::size_t start = 0; start + len <= n; start += static_cast<std::size_t>(params.stride)) {
    bool usable = true;
    counts.clear();
    for (std::size_t i = start; i < start + len; ++i) {
      if (!series.valid[i]) {
        usable = false;
        break;
      }
      ++counts[series.labels[i]];
    }
    if (!usable) continue;

    int label = kIgnoredLabel;
    int best = 0;
    // std::map iterates ascending with kIgnoredLabel first, so a strict '>'
    // gives ties to the lowest mapped class.
    for (const auto& [cls, count] : counts) {
      if (count > best || (count == best && label == kIgnoredLabel)) {
        best = count;
        label = cls;
      }
    }
    if (label == kIgnoredLabel) continue;

    Window w;
    w.steps = params.length;
    w.channels = series.channels;
    w.label = label;
    w.subject_id = series.subject_id;
    const auto begin = series.values.begin() + static_cast<std::ptrdiff_t>(start * series.channels);
    w.values.assign(begin, begin + static_cast<std::ptrdiff_t>(len * series.channels));
    bool finite = true;
    for (double v : w.values) finite &= std::isfinite(v);
    if (finite) out.push_back(std::move(w));
  }
  return out;
}

Split louo_split(std::span<const Window> windows, int target_subject) {
  Split split;
  for (const auto& w : windows) (w.subject_id == target_subject ? split.test : split.train).push_back(w);
  if (split.test.empty())
    fail(ErrorKind::InvalidInput, "louo_split: subject " + std::to_string(target_subject) + " has no windows");
  return split;
}

std::vector<int> subjects_of(std::span<const Window> windows) {
  std::set<int> ids;
  for (const auto& w : windows) ids.insert(w.subject_id);
  return {ids.begin(), ids.end()};
}

}  // namespace flow
