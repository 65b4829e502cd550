// flow: command-line front end.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flow/checkpoint.hpp"
#include "flow/error.hpp"
#include "flow/harness.hpp"

namespace fs = std::filesystem;
using namespace flow;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Schema:
      return kConfigError;
    case ErrorKind::Parse:
    case ErrorKind::SpecMismatch:
    case ErrorKind::ChannelUnusable:
    case ErrorKind::InsufficientData:
    case ErrorKind::DegenerateInit:
    case ErrorKind::Io:
      return kDataError;
    case ErrorKind::InvalidInput:
      return kRuntimeError;
  }
  return kRuntimeError;
}

// Options shared by the experiment subcommands. Precedence, lowest first:
// built-in defaults, --config file, FLOW_OUTPUT_DIR, explicit flags.
struct CommonOptions {
  std::string config_file;
  std::string spec;
  std::vector<std::string> data;
  std::string mode;
  std::string granularity;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch;
  std::optional<double> lr;
  std::string output_dir;
  std::vector<std::string> overrides;

  void add_to(CLI::App* app, bool with_mode = true) {
    app->add_option("-c,--config", config_file, "Key-value config file");
    app->add_option("--spec", spec, "Dataset spec file (omit for the synthetic population)");
    app->add_option("--data", data, "Recording files or directories");
    if (with_mode) app->add_option("--mode", mode, "vL_only | vG_only | vL_plus_vG_concat_baseline | flow");
    app->add_option("-g,--granularity", granularity, "just_local | small | medium | large");
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("-o,--output-dir", output_dir, "Output directory (env FLOW_OUTPUT_DIR)");
    app->add_option("--set", overrides, "Any config key as key=value (repeatable)");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = load_config(config_file, cfg);
    if (const char* env = std::getenv("FLOW_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!spec.empty()) cfg.dataset_spec = spec;
    if (!data.empty()) {
      cfg.data.clear();
      for (const auto& d : data) cfg.data.emplace_back(d);
    }
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    if (!granularity.empty()) cfg.granularity = parse_granularity(granularity);
    if (seed) cfg.train.seed = *seed;
    if (epochs) cfg.train.epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (lr) cfg.train.lr = *lr;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    return cfg;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

// Layout written by `synth`: one IMU, comma separated, with a header.
DatasetSpec synth_csv_spec(const std::vector<std::string>& class_names, double rate_hz) {
  DatasetSpec spec;
  spec.name = "synthetic";
  spec.delimiter = Delimiter::Comma;
  spec.header = true;
  spec.columns = {"timestamp", "subject", "label", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"};
  spec.timestamp_column = 0;
  spec.subject_column = 1;
  spec.label_column = 2;
  spec.sensors = {SensorColumns{"imu", {3, 4, 5}, {6, 7, 8}, {9, 10, 11}}};
  spec.native_rate_hz = rate_hz;
  spec.gyro_unit = GyroUnit::RadPerSec;
  spec.num_classes = static_cast<int>(class_names.size());
  spec.class_names = class_names;
  for (int i = 0; i < spec.num_classes; ++i) spec.label_map[i] = i;
  spec.default_granularity = "medium";
  return spec;
}

void write_synth_csv(const fs::path& path, const Recording& rec) {
  auto out = open_out(path);
  out << "timestamp,subject,label,ax,ay,az,gx,gy,gz,mx,my,mz\n";
  for (std::size_t i = 0; i < rec.length(); ++i) {
    const auto& s = rec.sensors[0][i];
    out << s.timestamp << ',' << rec.subject_id << ',' << rec.raw_labels[i] << ',' << s.a.x << ',' << s.a.y << ','
        << s.a.z << ',' << s.g.x << ',' << s.g.y << ',' << s.g.z << ',' << s.m.x << ',' << s.m.y << ',' << s.m.z
        << '\n';
  }
}

int cmd_synth(const CommonOptions& common, const fs::path& out_override) {
  ExperimentConfig cfg = common.build();
  const fs::path dir = out_override.empty() ? cfg.output_dir / "synth" : out_override;
  ensure_dir(dir);
  const auto& syn = cfg.synthetic;
  const auto templates = default_activity_templates(syn.duration_s, syn.rate_hz, syn.noise, syn.heading_rate);
  const auto pop = synth_population(syn.users, templates, syn.seed, syn.population);
  std::vector<std::string> names;
  for (const auto& t : templates) names.push_back(t.name);

  for (std::size_t r = 0; r < pop.recordings.size(); ++r) {
    const auto& rec = pop.recordings[r];
    write_synth_csv(dir / (rec.session + ".csv"), rec);
    auto truth = open_out(dir / "truth" / (rec.session + ".csv"));
    truth << "timestamp,qw,qx,qy,qz\n";
    for (std::size_t i = 0; i < rec.length(); ++i) {
      const auto& q = pop.ground_truth[r][i];
      truth << rec.sensors[0][i].timestamp << ',' << q.w << ',' << q.x << ',' << q.y << ',' << q.z << '\n';
    }
  }
  auto mounts = open_out(dir / "truth" / "mountings.csv");
  mounts << "subject,qw,qx,qy,qz\n";
  for (std::size_t u = 0; u < pop.mountings.size(); ++u) {
    const auto& q = pop.mountings[u];
    mounts << u + 1 << ',' << q.w << ',' << q.x << ',' << q.y << ',' << q.z << '\n';
  }
  auto spec_out = open_out(dir / "synth.spec");
  spec_out << synth_csv_spec(names, syn.rate_hz).to_text();
  std::cout << "wrote " << pop.recordings.size() << " recordings to " << dir.string() << '\n';
  return kOk;
}

// Output layout, one row per time step after warm-up trimming:
//   timestamp,subject,session,label
// then for each sensor <s>, local block followed by global block:
//   <s>_ax,<s>_ay,<s>_az,<s>_mx,<s>_my,<s>_mz,<s>_gx,<s>_gy,<s>_gz   (sensor frame, gyro in rad/s)
//   <s>_a_n,<s>_a_e,<s>_a_d,<s>_m_n,<s>_m_e,<s>_m_d,<s>_g_n,<s>_g_e,<s>_g_d,<s>_qw,<s>_qx,<s>_qy,<s>_qz
// Local values are the cleaned (interpolated, decimated) readings the global
// block was computed from.
int cmd_transform(const std::string& input, const std::string& spec_path, const std::string& output,
                  const CommonOptions& common) {
  ExperimentConfig cfg = common.build();
  const DatasetSpec spec = spec_path.empty() ? synth_csv_spec({"0", "1", "2", "3"}, cfg.synthetic.rate_hz)
                                             : DatasetSpec::load(spec_path);
  auto recs = load_recording(input, spec);
  const fs::path out_path = output.empty() ? cfg.output_dir / (fs::path(input).stem().string() + "_global.csv") : fs::path(output);
  auto out = open_out(out_path);

  static const char* kLocalNames[] = {"ax", "ay", "az", "mx", "my", "mz", "gx", "gy", "gz"};
  static const char* kGlobalNames[] = {"a_n", "a_e", "a_d", "m_n", "m_e", "m_d", "g_n",
                                       "g_e", "g_d", "qw",  "qx",  "qy",  "qz"};
  out << "timestamp,subject,session,label";
  for (const auto& sensor : spec.sensors) {
    for (const char* n : kLocalNames) out << ',' << sensor.name << '_' << n;
    for (const char* n : kGlobalNames) out << ',' << sensor.name << '_' << n;
  }
  out << '\n';

  std::size_t rows = 0;
  for (const auto& raw : recs) {
    Recording rec = interpolate_nans(raw, spec.max_gap);
    if (spec.decimation > 1) rec = decimate(rec, spec.decimation);
    MahonyParams p = cfg.mahony;
    p.sample_rate_hz = rec.sample_rate_hz;
    std::vector<McResult> mc;
    for (std::size_t s = 0; s < rec.num_sensors(); ++s) mc.push_back(mc_transform(rec.sensors[s], p));
    const std::size_t trimmed = mc.front().trimmed;
    for (std::size_t i = 0; i < mc.front().global.size(); ++i) {
      out << mc.front().global[i].timestamp << ',' << rec.subject_id << ',' << rec.session << ','
          << rec.raw_labels[i + trimmed];
      for (const auto& r : mc) {
        for (double v : local_channels(r.local[i])) out << ',' << v;
        for (double v : r.global[i].channels()) out << ',' << v;
      }
      out << '\n';
      ++rows;
    }
  }
  std::cout << "wrote " << rows << " rows (" << spec.sensors.size() << " sensors) to " << out_path.string() << '\n';
  return kOk;
}

void print_metrics(const std::string& title, double acc, double f1, std::size_t n) {
  std::cout << title << ": accuracy " << std::fixed << std::setprecision(4) << acc << "  weighted_f1 " << f1 << "  ("
            << n << " windows)\n";
}

int cmd_train(const CommonOptions& common, std::optional<int> target, std::string checkpoint, std::string log_path) {
  ExperimentConfig cfg = common.build();
  const PreparedData data = prepare_data(cfg);
  for (const auto& [subject, why] : data.failures)
    std::cerr << "warning: subject " << subject << " skipped: " << why << '\n';

  std::vector<Window> train, test;
  if (target) {
    Split s = louo_split(data.windows, *target);
    train = std::move(s.train);
    test = std::move(s.test);
  } else {
    train = data.windows;
  }
  if (train.empty()) fail(ErrorKind::InsufficientData, "no training windows");
  if (checkpoint.empty()) checkpoint = (cfg.output_dir / "model.ckpt").string();
  if (log_path.empty()) log_path = (cfg.output_dir / "train_log.csv").string();
  ensure_dir(fs::path(checkpoint).parent_path().empty() ? fs::path(".") : fs::path(checkpoint).parent_path());

  CheckpointInfo info;
  info.granularity = data.granularity;
  info.view_set = data.view_set;
  TrainLog log;
  if (cfg.mode == PipelineMode::Flow) {
    const ViewSchema schema = build_schema(data.granularity, ChannelLayout{data.num_sensors, data.view_set});
    auto hook = [&](int epoch, Model& m, MvfOptimizers<float>& opt) {
      info.epoch = epoch;
      save_checkpoint(checkpoint, m, info, &opt);
    };
    auto fitted = fit(train, data.classes, schema, cfg.train, test, hook);
    log = std::move(fitted.log);
    if (!test.empty()) {
      const auto preds = predict(fitted.model, test);
      std::vector<int> labels;
      for (const auto& w : test) labels.push_back(w.label);
      const auto cm = confusion(preds, labels, data.classes);
      print_metrics("target " + std::to_string(*target), accuracy(cm), weighted_f1(cm), test.size());
    }
  } else {
    auto fitted = fit_baseline(train, data.classes, cfg.train, test);
    info.epoch = cfg.train.epochs;
    save_checkpoint(checkpoint, fitted.model, info);
    log = std::move(fitted.log);
    if (!test.empty()) {
      const auto preds = predict(fitted.model, test);
      std::vector<int> labels;
      for (const auto& w : test) labels.push_back(w.label);
      const auto cm = confusion(preds, labels, data.classes);
      print_metrics("target " + std::to_string(*target), accuracy(cm), weighted_f1(cm), test.size());
    }
  }
  auto out = open_out(log_path);
  out << log.to_csv();
  std::cout << "trained " << to_string(cfg.mode) << " on " << train.size() << " windows; checkpoint " << checkpoint
            << ", log " << log_path << '\n';
  return kOk;
}

int cmd_eval(CommonOptions common, const std::string& checkpoint, std::optional<int> target,
             std::string confusion_path) {
  const CheckpointInfo info = read_checkpoint_info(checkpoint);
  ExperimentConfig cfg = common.build();
  if (info.kind == ModelKind::Mvf) {
    cfg.mode = PipelineMode::Flow;
  } else {
    cfg.mode = info.view_set == ViewSet::Local    ? PipelineMode::VlOnly
               : info.view_set == ViewSet::Global ? PipelineMode::VgOnly
                                                  : PipelineMode::VlVgConcat;
  }
  cfg.granularity = info.granularity;
  const PreparedData data = prepare_data(cfg);
  std::vector<Window> test;
  if (target) test = louo_split(data.windows, *target).test;
  else test = data.windows;
  if (test.empty()) fail(ErrorKind::InsufficientData, "no windows to evaluate");
  if (test.front().steps != info.config.steps || test.front().channels != info.config.channels)
    fail(ErrorKind::SpecMismatch, "data windows do not match the checkpoint's input shape");

  std::vector<int> preds;
  if (info.kind == ModelKind::Mvf) {
    Model m = load_mvf(checkpoint);
    preds = predict(m, test);
  } else {
    Baseline m = load_baseline(checkpoint);
    preds = predict(m, test);
  }
  std::vector<int> labels;
  for (const auto& w : test) labels.push_back(w.label);
  const auto cm = confusion(preds, labels, info.config.classes);
  print_metrics(target ? "target " + std::to_string(*target) : std::string("all subjects"), accuracy(cm),
                weighted_f1(cm), test.size());
  if (confusion_path.empty()) confusion_path = (cfg.output_dir / "eval_confusion.csv").string();
  auto out = open_out(confusion_path);
  out << cm.to_csv();
  return kOk;
}

int cmd_louo(const CommonOptions& common, bool resume, std::optional<int> jobs, const std::vector<int>& targets) {
  ExperimentConfig cfg = common.build();
  if (resume) cfg.resume = true;
  if (jobs) cfg.jobs = *jobs;
  if (!targets.empty()) cfg.targets = targets;
  cfg.validate();
  const ExperimentReport report = run_louo(cfg);
  emit_report(report, cfg.output_dir);
  std::cout << format_report(report);
  std::cout << "report written to " << cfg.output_dir.string() << '\n';
  for (const auto& r : report.rows)
    if (!r.ok) return kRuntimeError;
  return kOk;
}

int cmd_report(const std::vector<std::string>& dirs, bool csv) {
  if (csv) std::cout << "dataset,mode,granularity,target,accuracy,weighted_f1\n";
  for (const auto& d : dirs) {
    const ExperimentReport r = load_report(d);
    if (!csv) {
      std::cout << format_report(r);
      continue;
    }
    std::cout << std::setprecision(6);
    for (const auto& row : r.rows)
      if (row.ok)
        std::cout << r.dataset << ',' << to_string(r.mode) << ',' << to_string(r.granularity) << ',' << row.subject
                  << ',' << row.accuracy << ',' << row.weighted_f1 << '\n';
    std::cout << r.dataset << ',' << to_string(r.mode) << ',' << to_string(r.granularity) << ",average,"
              << r.average_accuracy << ',' << r.average_f1 << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-user activity recognition with attitude-based global views and multi-view fusion"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* synth = app.add_subcommand("synth", "Write a synthetic mounting-rotated population as CSV");
  std::string synth_dir;
  common.add_to(synth, false);
  synth->add_option("--dir", synth_dir, "Target directory (default <output-dir>/synth)");

  auto* transform = app.add_subcommand("transform", "Convert local IMU recordings to the global view");
  std::string t_input, t_spec, t_output;
  transform->add_option("input", t_input, "Recording file")->required();
  transform->add_option("--spec", t_spec, "Dataset spec (default: the synth CSV layout)");
  transform->add_option("--out", t_output, "Output CSV");
  transform->add_option("-c,--config", common.config_file, "Key-value config file");
  transform->add_option("--set", common.overrides, "Any config key as key=value (repeatable)");
  transform->add_option("-o,--output-dir", common.output_dir, "Output directory");

  auto* train = app.add_subcommand("train", "Train one model");
  std::optional<int> train_target;
  std::string ckpt_out, log_out;
  common.add_to(train);
  train->add_option("--target", train_target, "Hold out this subject (LOUO)");
  train->add_option("--checkpoint", ckpt_out, "Checkpoint path (default <output-dir>/model.ckpt)");
  train->add_option("--log", log_out, "Per-epoch log (default <output-dir>/train_log.csv)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ckpt_in, confusion_out;
  std::optional<int> eval_target;
  common.add_to(eval, false);
  eval->add_option("--checkpoint", ckpt_in, "Checkpoint to load")->required();
  eval->add_option("--target", eval_target, "Evaluate only this subject");
  eval->add_option("--confusion", confusion_out, "Confusion CSV path");

  auto* louo = app.add_subcommand("louo", "Leave-one-user-out sweep");
  bool resume = false;
  std::optional<int> jobs;
  std::vector<int> targets;
  common.add_to(louo);
  louo->add_flag("--resume", resume, "Skip subjects with a completed row marker");
  louo->add_option("-j,--jobs", jobs, "Subjects trained in parallel");
  louo->add_option("--targets", targets, "Target subjects (default all)")->delimiter(',');

  auto* report = app.add_subcommand("report", "Print LOUO reports");
  std::vector<std::string> report_dirs;
  bool report_csv = false;
  report->add_option("dirs", report_dirs, "Report directories")->required();
  report->add_flag("--csv", report_csv, "CSV instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*synth) return cmd_synth(common, synth_dir);
    if (*transform) return cmd_transform(t_input, t_spec, t_output, common);
    if (*train) return cmd_train(common, train_target, ckpt_out, log_out);
    if (*eval) return cmd_eval(common, ckpt_in, eval_target, confusion_out);
    if (*louo) return cmd_louo(common, resume, jobs, targets);
    if (*report) return cmd_report(report_dirs, report_csv);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
