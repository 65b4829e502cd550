#include "flow/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "flow/error.hpp"
#include "json.hpp"

namespace flow {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const std::string v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    fail(ErrorKind::Config, "option '" + key + "': cannot parse '" + value + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::Config, "option '" + key + "': expected true or false, got '" + value + "'");
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string join_paths(const std::vector<fs::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += (out.empty() ? "" : ",") + p.string();
  return out;
}

std::vector<fs::path> expand_data(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) found.push_back(e.path());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p, ec)) {
      files.push_back(p);
    } else {
      fail(ErrorKind::Io, "data path does not exist: " + p.string());
    }
  }
  if (files.empty()) fail(ErrorKind::Io, "no recording files found under the configured data paths");
  return files;
}

// splitmix64 finalizer.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json log_to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"loss_mvf1", e.loss_mvf1},
                      {"loss_mvf2", e.loss_mvf2},
                      {"train_acc", e.train_accuracy},
                      {"test_acc", e.test_accuracy},
                      {"test_view_acc", e.test_view_accuracy}});
  return {{"two_phase", log.two_phase}, {"views", log.views}, {"epochs", epochs}};
}

TrainLog log_from_json(const json& j) {
  TrainLog log;
  log.two_phase = j.at("two_phase").get<bool>();
  log.views = j.at("views").get<int>();
  for (const auto& e : j.at("epochs")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<int>();
    r.loss_mvf1 = e.at("loss_mvf1").get<double>();
    r.loss_mvf2 = e.at("loss_mvf2").get<double>();
    r.train_accuracy = e.at("train_acc").get<double>();
    r.test_accuracy = e.at("test_acc").get<double>();
    r.test_view_accuracy = e.at("test_view_acc").get<std::vector<double>>();
    log.epochs.push_back(std::move(r));
  }
  return log;
}

json row_to_json(const SubjectRow& r) {
  json j{{"subject", r.subject},           {"ok", r.ok},
         {"error", r.error},               {"accuracy", r.accuracy},
         {"weighted_f1", r.weighted_f1},   {"train_windows", r.train_windows},
         {"test_windows", r.test_windows}, {"seed", r.seed},
         {"seconds", r.seconds}};
  if (r.ok) {
    j["confusion"] = {{"k", r.confusion.k}, {"counts", r.confusion.counts}};
    j["curve"] = log_to_json(r.log);
  }
  return j;
}

SubjectRow row_from_json(const json& j) {
  SubjectRow r;
  r.subject = j.at("subject").get<int>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.at("error").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.train_windows = j.at("train_windows").get<std::size_t>();
  r.test_windows = j.at("test_windows").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.seconds = j.at("seconds").get<double>();
  if (r.ok) {
    r.confusion = ConfusionMatrix(j.at("confusion").at("k").get<int>());
    r.confusion.counts = j.at("confusion").at("counts").get<std::vector<std::int64_t>>();
    if (r.confusion.counts.size() != static_cast<std::size_t>(r.confusion.k) * r.confusion.k)
      fail(ErrorKind::Parse, "report row: confusion matrix has the wrong size");
    r.log = log_from_json(j.at("curve"));
  }
  return r;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path marker_path(const fs::path& out, int subject) {
  return out / "rows" / ("subject_" + std::to_string(subject) + ".json");
}

std::vector<Window> windows_for(const Recording& rec, const ExperimentConfig& cfg, ViewSet set) {
  return segment_windows(assemble_views(rec, cfg.mahony, set), cfg.window);
}

}  // namespace

const char* to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::VlOnly: return "vL_only";
    case PipelineMode::VgOnly: return "vG_only";
    case PipelineMode::VlVgConcat: return "vL_plus_vG_concat_baseline";
    case PipelineMode::Flow: return "flow";
  }
  return "?";
}

PipelineMode parse_mode(const std::string& s) {
  for (auto m : {PipelineMode::VlOnly, PipelineMode::VgOnly, PipelineMode::VlVgConcat, PipelineMode::Flow})
    if (s == to_string(m)) return m;
  fail(ErrorKind::Config, "unknown mode '" + s + "' (expected vL_only, vG_only, vL_plus_vG_concat_baseline or flow)");
}

ViewSet view_set_for(PipelineMode m, Granularity g) {
  switch (m) {
    case PipelineMode::VlOnly: return ViewSet::Local;
    case PipelineMode::VgOnly: return ViewSet::Global;
    case PipelineMode::VlVgConcat: return ViewSet::LocalGlobal;
    case PipelineMode::Flow: return g == Granularity::JustLocal ? ViewSet::Local : ViewSet::LocalGlobal;
  }
  return ViewSet::LocalGlobal;
}

void ExperimentConfig::validate() const {
  train.validate();
  mahony.validate();
  if (window.length < 1 || window.stride < 1) fail(ErrorKind::Config, "window length and stride must be >= 1");
  if (jobs < 1) fail(ErrorKind::Config, "jobs must be >= 1");
  if (dataset_spec.empty()) {
    if (synthetic.users < 2) fail(ErrorKind::Config, "LOUO needs at least 2 synthetic users");
    if (!(synthetic.duration_s > 0.0) || !(synthetic.rate_hz > 0.0))
      fail(ErrorKind::Config, "synthetic duration and rate must be > 0");
  } else if (data.empty()) {
    fail(ErrorKind::Config, "a dataset spec needs at least one data path");
  }
  if (output_dir.empty()) fail(ErrorKind::Config, "output_dir must not be empty");
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  auto num = [&]<typename T>(T& dst) { dst = parse_number<T>(key, value); };
  auto& syn = synthetic;
  auto& pop = synthetic.population;

  if (key == "dataset_spec") dataset_spec = value;
  else if (key == "data") {
    data.clear();
    for (const auto& p : split_list(value)) data.emplace_back(p);
  } else if (key == "mode") mode = parse_mode(value);
  else if (key == "granularity") {
    if (value.empty() || value == "default") granularity.reset();
    else granularity = parse_granularity(value);
  } else if (key == "targets") {
    targets.clear();
    if (value != "all" && !value.empty())
      for (const auto& t : split_list(value)) targets.push_back(parse_number<int>(key, t));
  } else if (key == "epochs") num(train.epochs);
  else if (key == "batch_size") num(train.batch_size);
  else if (key == "lr") num(train.lr);
  else if (key == "beta1") num(train.beta1);
  else if (key == "beta2") num(train.beta2);
  else if (key == "eps") num(train.eps);
  else if (key == "seed") num(train.seed);
  else if (key == "eval_every") num(train.eval_every);
  else if (key == "checkpoint_every") num(train.checkpoint_every);
  else if (key == "phase2_fresh_batch") train.phase2_fresh_batch = parse_bool(key, value);
  else if (key == "kp") num(mahony.kp);
  else if (key == "ki") num(mahony.ki);
  else if (key == "warmup_s") num(mahony.warmup_seconds);
  else if (key == "mag_reference") {
    if (value == "horizontal") mahony.mag_reference = MagReference::HorizontalProjection;
    else if (value == "fixed") mahony.mag_reference = MagReference::FixedInclination;
    else fail(ErrorKind::Config, "mag_reference must be horizontal or fixed");
  } else if (key == "inclination_deg") num(mahony.fixed_inclination_deg);
  else if (key == "window") num(window.length);
  else if (key == "stride") num(window.stride);
  else if (key == "output_dir") output_dir = value;
  else if (key == "jobs") num(jobs);
  else if (key == "resume") resume = parse_bool(key, value);
  else if (key == "synthetic.users") num(syn.users);
  else if (key == "synthetic.duration_s") num(syn.duration_s);
  else if (key == "synthetic.rate_hz") num(syn.rate_hz);
  else if (key == "synthetic.seed") num(syn.seed);
  else if (key == "synthetic.heading_rate") num(syn.heading_rate);
  else if (key == "synthetic.noise_accel") num(syn.noise.accel);
  else if (key == "synthetic.noise_gyro") num(syn.noise.gyro);
  else if (key == "synthetic.noise_mag") num(syn.noise.mag);
  else if (key == "synthetic.min_separation_deg") num(pop.min_mounting_separation_deg);
  else if (key == "synthetic.max_mounting_deg") num(pop.max_mounting_angle_deg);
  else if (key == "synthetic.amplitude_jitter") num(pop.amplitude_jitter);
  else if (key == "synthetic.tempo_jitter") num(pop.tempo_jitter);
  else if (key == "synthetic.random_heading") pop.random_heading = parse_bool(key, value);
  else if (key == "synthetic.session_jitter_deg") num(pop.session_mounting_jitter_deg);
  else fail(ErrorKind::Config, "unknown option '" + key + "'");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  const auto& syn = synthetic;
  const auto& pop = synthetic.population;
  o << "dataset_spec = " << dataset_spec.string() << '\n'
    << "data = " << join_paths(data) << '\n'
    << "mode = " << to_string(mode) << '\n'
    << "granularity = " << (granularity ? to_string(*granularity) : "default") << '\n'
    << "targets = ";
  if (targets.empty()) o << "all";
  for (std::size_t i = 0; i < targets.size(); ++i) o << (i ? "," : "") << targets[i];
  o << '\n'
    << "epochs = " << train.epochs << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "lr = " << fmt(train.lr) << '\n'
    << "beta1 = " << fmt(train.beta1) << '\n'
    << "beta2 = " << fmt(train.beta2) << '\n'
    << "eps = " << fmt(train.eps) << '\n'
    << "seed = " << train.seed << '\n'
    << "eval_every = " << train.eval_every << '\n'
    << "checkpoint_every = " << train.checkpoint_every << '\n'
    << "phase2_fresh_batch = " << (train.phase2_fresh_batch ? "true" : "false") << '\n'
    << "kp = " << fmt(mahony.kp) << '\n'
    << "ki = " << fmt(mahony.ki) << '\n'
    << "warmup_s = " << fmt(mahony.warmup_seconds) << '\n'
    << "mag_reference = "
    << (mahony.mag_reference == MagReference::HorizontalProjection ? "horizontal" : "fixed") << '\n'
    << "inclination_deg = " << fmt(mahony.fixed_inclination_deg) << '\n'
    << "window = " << window.length << '\n'
    << "stride = " << window.stride << '\n'
    << "synthetic.users = " << syn.users << '\n'
    << "synthetic.duration_s = " << fmt(syn.duration_s) << '\n'
    << "synthetic.rate_hz = " << fmt(syn.rate_hz) << '\n'
    << "synthetic.seed = " << syn.seed << '\n'
    << "synthetic.heading_rate = " << fmt(syn.heading_rate) << '\n'
    << "synthetic.noise_accel = " << fmt(syn.noise.accel) << '\n'
    << "synthetic.noise_gyro = " << fmt(syn.noise.gyro) << '\n'
    << "synthetic.noise_mag = " << fmt(syn.noise.mag) << '\n'
    << "synthetic.min_separation_deg = " << fmt(pop.min_mounting_separation_deg) << '\n'
    << "synthetic.max_mounting_deg = " << fmt(pop.max_mounting_angle_deg) << '\n'
    << "synthetic.amplitude_jitter = " << fmt(pop.amplitude_jitter) << '\n'
    << "synthetic.tempo_jitter = " << fmt(pop.tempo_jitter) << '\n'
    << "synthetic.random_heading = " << (pop.random_heading ? "true" : "false") << '\n'
    << "synthetic.session_jitter_deg = " << fmt(pop.session_mounting_jitter_deg) << '\n';
  // output_dir, jobs and resume do not change results and stay out of the
  // echo so that resume markers remain valid across them.
  return o.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) fail(ErrorKind::Config, "config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return out;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  for (const auto& [k, v] : parse_key_values(ss.str())) base.set(k, v);
  return base;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData out;

  std::vector<Recording> recordings;
  std::size_t max_gap = 10;
  int decimation = 1;
  Granularity default_granularity = Granularity::Medium;
  if (cfg.dataset_spec.empty()) {
    const auto templates = default_activity_templates(cfg.synthetic.duration_s, cfg.synthetic.rate_hz,
                                                      cfg.synthetic.noise, cfg.synthetic.heading_rate);
    auto pop = synth_population(cfg.synthetic.users, templates, cfg.synthetic.seed, cfg.synthetic.population);
    recordings = std::move(pop.recordings);
    out.classes = static_cast<int>(templates.size());
    for (const auto& t : templates) out.class_names.push_back(t.name);
  } else {
    const DatasetSpec spec = DatasetSpec::load(cfg.dataset_spec);
    for (const auto& file : expand_data(cfg.data)) {
      auto recs = load_recording(file, spec);
      for (auto& r : recs) recordings.push_back(std::move(r));
    }
    out.classes = spec.num_classes;
    out.class_names = spec.class_names;
    max_gap = spec.max_gap;
    decimation = spec.decimation;
    default_granularity = parse_granularity(spec.default_granularity);
  }
  if (recordings.empty()) fail(ErrorKind::InsufficientData, "no recordings loaded");

  out.granularity = cfg.granularity.value_or(default_granularity);
  out.view_set = view_set_for(cfg.mode, out.granularity);
  out.num_sensors = static_cast<int>(recordings.front().num_sensors());

  for (const auto& raw : recordings) {
    if (std::find(out.subjects.begin(), out.subjects.end(), raw.subject_id) == out.subjects.end())
      out.subjects.push_back(raw.subject_id);
    try {
      if (static_cast<int>(raw.num_sensors()) != out.num_sensors)
        fail(ErrorKind::SpecMismatch, "recording has a different number of sensors");
      Recording rec = interpolate_nans(raw, max_gap);
      if (decimation > 1) rec = decimate(rec, decimation);
      auto w = windows_for(rec, cfg, out.view_set);
      out.windows.insert(out.windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    } catch (const Error& e) {
      auto& msg = out.failures[raw.subject_id];
      msg += (msg.empty() ? "" : "; ") + ("session " + raw.session + ": " + e.what());
    }
  }
  std::sort(out.subjects.begin(), out.subjects.end());
  // A failed subject contributes neither training nor test data.
  std::erase_if(out.windows, [&](const Window& w) { return out.failures.count(w.subject_id) > 0; });
  return out;
}

RunMetrics run_baseline(std::span<const Window> train, std::span<const Window> test, int classes,
                        const TrainConfig& config) {
  if (test.empty()) fail(ErrorKind::InvalidInput, "run_baseline: empty test set");
  auto fitted = fit_baseline(train, classes, config, test);
  RunMetrics m;
  const auto preds = predict(fitted.model, test);
  std::vector<int> labels;
  for (const auto& w : test) labels.push_back(w.label);
  m.confusion = confusion(preds, labels, classes);
  m.accuracy = accuracy(m.confusion);
  m.weighted_f1 = weighted_f1(m.confusion);
  m.log = std::move(fitted.log);
  return m;
}

RunMetrics run_flow(std::span<const Window> train, std::span<const Window> test, int classes,
                    const ViewSchema& schema, const TrainConfig& config) {
  if (test.empty()) fail(ErrorKind::InvalidInput, "run_flow: empty test set");
  auto fitted = fit(train, classes, schema, config, test);
  RunMetrics m;
  const auto preds = predict(fitted.model, test);
  std::vector<int> labels;
  for (const auto& w : test) labels.push_back(w.label);
  m.confusion = confusion(preds, labels, classes);
  m.accuracy = accuracy(m.confusion);
  m.weighted_f1 = weighted_f1(m.confusion);
  m.log = std::move(fitted.log);
  return m;
}

void ExperimentReport::compute_average() {
  completed = 0;
  double acc = 0.0, f1 = 0.0;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    ++completed;
    acc += r.accuracy;
    f1 += r.weighted_f1;
  }
  average_accuracy = completed ? acc / completed : 0.0;
  average_f1 = completed ? f1 / completed : 0.0;
}

std::uint64_t derive_seed(std::uint64_t seed, int subject) {
  return mix(seed ^ mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(subject))));
}

ExperimentReport run_louo(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedData data = prepare_data(cfg);
  if (data.subjects.size() < 2) fail(ErrorKind::InsufficientData, "LOUO needs at least 2 subjects");

  ExperimentReport report;
  report.dataset = cfg.dataset_spec.empty() ? "synthetic" : cfg.dataset_spec.stem().string();
  report.mode = cfg.mode;
  report.granularity = data.granularity;
  report.seed = cfg.train.seed;
  report.config_text = cfg.to_text();

  std::vector<int> targets = cfg.targets.empty() ? data.subjects : cfg.targets;
  for (int t : targets)
    if (std::find(data.subjects.begin(), data.subjects.end(), t) == data.subjects.end())
      fail(ErrorKind::Config, "target subject " + std::to_string(t) + " is not in the dataset");
  report.rows.resize(targets.size());

  const bool flow_mode = cfg.mode == PipelineMode::Flow;
  std::optional<ViewSchema> schema;
  if (flow_mode) schema = build_schema(data.granularity, ChannelLayout{data.num_sensors, data.view_set});

  std::error_code ec;
  fs::create_directories(cfg.output_dir / "rows", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + (cfg.output_dir / "rows").string() + ": " + ec.message());

  auto run_row = [&](std::size_t idx) {
    const int subject = targets[idx];
    const fs::path marker = marker_path(cfg.output_dir, subject);
    if (cfg.resume && fs::exists(marker)) {
      try {
        const json j = json::parse(read_file(marker));
        if (j.at("config").get<std::string>() == report.config_text) {
          report.rows[idx] = row_from_json(j.at("row"));
          return;
        }
      } catch (const std::exception&) {
        // Unreadable marker: recompute the row.
      }
    }

    SubjectRow row;
    row.subject = subject;
    row.seed = derive_seed(cfg.train.seed, subject);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (auto it = data.failures.find(subject); it != data.failures.end())
        fail(ErrorKind::InsufficientData, "preprocessing failed: " + it->second);
      const Split split = louo_split(data.windows, subject);
      if (split.train.empty()) fail(ErrorKind::InsufficientData, "no training windows outside the target subject");
      TrainConfig tc = cfg.train;
      tc.seed = row.seed;
      RunMetrics m = flow_mode ? run_flow(split.train, split.test, data.classes, *schema, tc)
                               : run_baseline(split.train, split.test, data.classes, tc);
      row.ok = true;
      row.accuracy = m.accuracy;
      row.weighted_f1 = m.weighted_f1;
      row.confusion = std::move(m.confusion);
      row.log = std::move(m.log);
      row.train_windows = split.train.size();
      row.test_windows = split.test.size();
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (row.ok) {
      const json j{{"config", report.config_text}, {"row", row_to_json(row)}};
      write_file(marker, j.dump(1));
    }
    report.rows[idx] = std::move(row);
  };

  const int workers = std::min<int>(cfg.jobs, static_cast<int>(targets.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) run_row(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < targets.size();) {
          try {
            run_row(i);
          } catch (...) {
            std::lock_guard lock(err_mu);
            if (!err) err = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
  }

  report.compute_average();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void emit_report(const ExperimentReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back(row_to_json(r));
    if (!r.ok) continue;
    write_file(dir / ("confusion_subject" + std::to_string(r.subject) + ".csv"), r.confusion.to_csv());
    write_file(dir / ("curves_subject" + std::to_string(r.subject) + ".csv"), r.log.to_csv());
  }
  const json summary{{"dataset", report.dataset},
                     {"mode", to_string(report.mode)},
                     {"granularity", to_string(report.granularity)},
                     {"seed", report.seed},
                     {"config", report.config_text},
                     {"wall_seconds", report.wall_seconds},
                     {"rows", rows},
                     {"average",
                      {{"accuracy", report.average_accuracy},
                       {"weighted_f1", report.average_f1},
                       {"completed", report.completed}}}};
  write_file(dir / "summary.json", summary.dump(1));
}

ExperimentReport load_report(const fs::path& dir) {
  const fs::path path = dir / "summary.json";
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  ExperimentReport r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.granularity = parse_granularity(j.at("granularity").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_text = j.at("config").get<std::string>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    for (const auto& row : j.at("rows")) r.rows.push_back(row_from_json(row));
    r.average_accuracy = j.at("average").at("accuracy").get<double>();
    r.average_f1 = j.at("average").at("weighted_f1").get<double>();
    r.completed = j.at("average").at("completed").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return r;
}

std::string format_report(const ExperimentReport& report) {
  std::ostringstream o;
  o << report.dataset << "  mode=" << to_string(report.mode) << "  granularity=" << to_string(report.granularity)
    << "  seed=" << report.seed << '\n';
  o << std::left << std::setw(10) << "target" << std::setw(12) << "accuracy" << std::setw(12) << "weighted_f1"
    << "windows\n";
  o << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    o << std::setw(10) << r.subject;
    if (r.ok)
      o << std::setw(12) << r.accuracy << std::setw(12) << r.weighted_f1 << r.test_windows << '\n';
    else
      o << "failed: " << r.error << '\n';
  }
  o << std::setw(10) << "average" << std::setw(12) << report.average_accuracy << std::setw(12) << report.average_f1
    << report.completed << " of " << report.rows.size() << " subjects\n";
  return o.str();
}

}  // namespace flow
