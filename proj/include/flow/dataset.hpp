#pragma once

// Ingestion, cleaning, windowing and leave-one-user-out splitting of
// columnar IMU recordings (PAMAP2 / OPPORTUNITY style).

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flow/globalview.hpp"

namespace flow {

// Class index assigned to rows whose raw label is not in the label map.
inline constexpr int kIgnoredLabel = -1;

enum class GyroUnit { RadPerSec, DegPerSec };
enum class Delimiter { Whitespace, Comma };

struct SensorColumns {
  std::string name;
  std::array<int, 3> accel{};
  std::array<int, 3> gyro{};
  std::array<int, 3> mag{};
};

// Describes how to read one dataset's files. Stored on disk as a key-value
// text file, see DatasetSpec::parse for the keys.
struct DatasetSpec {
  std::string name;
  Delimiter delimiter = Delimiter::Whitespace;
  bool header = false;
  // Expected header names, checked when `header` is set and non-empty.
  std::vector<std::string> columns;
  int timestamp_column = -1;
  int label_column = 0;
  // -1: parse the subject id from the first integer in the file name.
  int subject_column = -1;
  std::vector<SensorColumns> sensors;
  double native_rate_hz = 30.0;
  int decimation = 1;
  GyroUnit gyro_unit = GyroUnit::RadPerSec;
  double accel_scale = 1.0;
  // raw gyro multiplier, applied before the unit conversion
  double gyro_scale = 1.0;
  double timestamp_scale = 1.0;
  std::map<long, int> label_map;
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::size_t max_gap = 10;
  std::string default_granularity = "medium";

  double sample_rate_hz() const { return native_rate_hz / decimation; }
  int max_column() const;
  void validate() const;

  // Format: one `key = value` per line, '#' starts a comment.
  //   name, delimiter (whitespace|comma), header (true|false),
  //   columns (comma list), timestamp_column, label_column,
  //   subject (filename|column:<i>), native_rate_hz, decimation,
  //   gyro_unit (rad/s|deg/s), accel_scale, gyro_scale, timestamp_scale, num_classes,
  //   labels (space separated raw:class pairs), class_names (comma list),
  //   max_gap, default_granularity,
  //   sensor = <name> ax,ay,az gx,gy,gz mx,my,mz   (repeatable)
  static DatasetSpec parse(const std::string& text);
  static DatasetSpec load(const std::filesystem::path& path);
  std::string to_text() const;
};

struct Recording {
  int subject_id = 0;
  std::string session;
  double sample_rate_hz = 0.0;
  std::vector<std::string> sensor_names;
  // sensors[s][i]: sample i of sensor s. May hold NaN before interpolate_nans.
  std::vector<std::vector<LocalSample>> sensors;
  std::vector<long> raw_labels;
  std::vector<int> labels;  // class index or kIgnoredLabel
  std::vector<std::uint8_t> valid;

  std::size_t length() const { return labels.size(); }
  std::size_t num_sensors() const { return sensors.size(); }
  // Throws InvalidInput when per-sensor, label and mask lengths disagree.
  void validate() const;
};

// One recording per (subject, session). The session is the file stem; when
// the spec names a subject column, each contiguous run of a subject id
// becomes its own recording.
std::vector<Recording> load_recording(const std::filesystem::path& path, const DatasetSpec& spec);

// Linear interpolation over NaN runs of at most `max_gap` samples; leading and
// trailing runs take the nearest valid value. Longer interior runs are
// interpolated but flagged invalid. Returns false if no value is finite.
bool interpolate_channel(std::span<double> values, std::size_t max_gap,
                         std::span<std::uint8_t> valid);

// Throws ChannelUnusable if any channel has no finite value at all.
Recording interpolate_nans(const Recording& rec, std::size_t max_gap);

Recording decimate(const Recording& rec, int factor);

// Channels per timestep for windowing. Per sensor, in sensor order: the nine
// local channels and/or the thirteen global channels.
enum class ViewSet { Local, Global, LocalGlobal };

int channels_per_sensor(ViewSet set);

struct ChannelSeries {
  int subject_id = 0;
  int channels = 0;
  std::vector<double> values;  // length() x channels, row-major
  std::vector<int> labels;
  std::vector<std::uint8_t> valid;

  std::size_t length() const { return labels.size(); }
};

// Applies M&C to every sensor and lays out the requested views. The warm-up
// prefix is removed for every ViewSet so that all arms see identical windows.
ChannelSeries assemble_views(const Recording& rec, const MahonyParams& params, ViewSet set);

struct Window {
  int steps = 0;
  int channels = 0;
  std::vector<double> values;  // steps x channels, row-major
  int label = 0;
  int subject_id = 0;

  double at(int t, int c) const { return values[static_cast<std::size_t>(t) * channels + c]; }
};

struct WindowParams {
  int length = 64;
  int stride = 32;
};

// Sliding windows labelled by majority class (ties go to the lower class
// index, ignored rows never win a tie). Windows touching invalid samples or
// whose majority is ignored are dropped.
std::vector<Window> segment_windows(const ChannelSeries& series, const WindowParams& params);

struct Split {
  std::vector<Window> train;
  std::vector<Window> test;
};

// Throws InvalidInput when the target subject owns no window.
Split louo_split(std::span<const Window> windows, int target_subject);

std::vector<int> subjects_of(std::span<const Window> windows);

}  // namespace flow
