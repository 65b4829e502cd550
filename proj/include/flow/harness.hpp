#pragma once

// Experiment orchestration: data preparation, leave-one-user-out sweeps over
// the four pipeline arms, and report files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flow/metrics.hpp"
#include "flow/synth.hpp"
#include "flow/trainer.hpp"

namespace flow {

enum class PipelineMode { VlOnly, VgOnly, VlVgConcat, Flow };

// vL_only | vG_only | vL_plus_vG_concat_baseline | flow
const char* to_string(PipelineMode m);
PipelineMode parse_mode(const std::string& s);
// Channels each arm trains on; flow at just_local granularity needs only the
// local view.
ViewSet view_set_for(PipelineMode m, Granularity g);

// The synthetic population used when no dataset spec is configured.
struct SyntheticSource {
  int users = 3;
  double duration_s = 20.0;
  double rate_hz = 30.0;
  std::uint64_t seed = 7;
  double heading_rate = 0.8;
  NoiseStd noise{0.05, 0.01, 0.01};
  PopulationOptions population{30.0, 60.0, 0.1, 0.1, true, 0.0};
};

struct ExperimentConfig {
  // Empty: use the synthetic population.
  std::filesystem::path dataset_spec;
  // Recording files, or directories whose regular files are all read.
  std::vector<std::filesystem::path> data;
  SyntheticSource synthetic;

  PipelineMode mode = PipelineMode::Flow;
  // Unset: the dataset's default (medium for synthetic data).
  std::optional<Granularity> granularity;
  // Empty: every subject.
  std::vector<int> targets;
  TrainConfig train;
  MahonyParams mahony;
  WindowParams window;
  std::filesystem::path output_dir = "flow_out";
  int jobs = 1;
  bool resume = false;

  void validate() const;
  // Sets one option by its config-file key. Throws Config for unknown keys
  // and malformed values.
  void set(const std::string& key, const std::string& value);
  // Every option as `key = value` lines, in a fixed order.
  std::string to_text() const;
};

// Parses `key = value` lines ('#' comments, blank lines ignored).
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct PreparedData {
  std::vector<Window> windows;
  int classes = 0;
  int num_sensors = 0;
  ViewSet view_set = ViewSet::LocalGlobal;
  Granularity granularity = Granularity::Medium;
  std::vector<std::string> class_names;
  // Subjects whose recordings could not be processed, with the reason.
  std::map<int, std::string> failures;
  std::vector<int> subjects;  // every subject seen, failed or not
};

// Ingest -> interpolate -> decimate -> M&C -> window, once per dataset.
// A recording that fails marks its subject as failed instead of aborting.
PreparedData prepare_data(const ExperimentConfig& cfg);

struct RunMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  ConfusionMatrix confusion;
  TrainLog log;
};

// Backbone plus single head, cross-entropy only.
RunMetrics run_baseline(std::span<const Window> train, std::span<const Window> test, int classes,
                        const TrainConfig& config);
// Two-phase MVFNet training on `train`, scored on `test`.
RunMetrics run_flow(std::span<const Window> train, std::span<const Window> test, int classes,
                    const ViewSchema& schema, const TrainConfig& config);

struct SubjectRow {
  int subject = 0;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  ConfusionMatrix confusion;
  TrainLog log;
  std::size_t train_windows = 0;
  std::size_t test_windows = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct ExperimentReport {
  std::string dataset;
  PipelineMode mode = PipelineMode::Flow;
  Granularity granularity = Granularity::Medium;
  std::uint64_t seed = 0;
  std::string config_text;
  std::vector<SubjectRow> rows;
  // Means over the successful rows.
  double average_accuracy = 0.0;
  double average_f1 = 0.0;
  int completed = 0;
  double wall_seconds = 0.0;

  void compute_average();
};

// Seed used for one target subject's run.
std::uint64_t derive_seed(std::uint64_t seed, int subject);

// Runs every target subject. With cfg.resume, rows whose marker under
// output_dir/rows matches the current configuration are reused. Markers are
// written as rows finish.
ExperimentReport run_louo(const ExperimentConfig& cfg);

// summary.json, confusion_subject<id>.csv and curves_subject<id>.csv.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);
// Reads back summary.json.
ExperimentReport load_report(const std::filesystem::path& dir);
// Per-subject accuracy / F1 table with the average row last.
std::string format_report(const ExperimentReport& report);

}  // namespace flow
