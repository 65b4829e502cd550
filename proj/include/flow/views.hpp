#pragma once

// View schemas over a window's channels and the view-based batch shuffle.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flow/dataset.hpp"

namespace flow {

enum class Granularity { JustLocal, Small, Medium, Large };

const char* to_string(Granularity g);
// Accepts just_local | small | medium | large. Throws Config otherwise.
Granularity parse_granularity(const std::string& s);

// Which per-sensor channel groups a window carries.
struct ChannelLayout {
  int num_sensors = 1;
  ViewSet set = ViewSet::LocalGlobal;

  int channels() const { return num_sensors * channels_per_sensor(set); }
  bool has_local() const { return set != ViewSet::Global; }
  bool has_global() const { return set != ViewSet::Local; }
  // First channel of sensor s's local (resp. global) block.
  int local_offset(int sensor) const;
  int global_offset(int sensor) const;
};

struct ViewSchema {
  Granularity granularity = Granularity::Medium;
  std::vector<std::vector<int>> views;
  int num_channels = 0;

  int n() const { return static_cast<int>(views.size()); }
};

// View order is sensor-major with local before global. The small scheme uses
// a, m, g, a', m', g', q per sensor. Channels not listed in any view (e.g.
// global channels under just_local) are carried through a shuffle unchanged.
ViewSchema build_schema(Granularity granularity, const ChannelLayout& layout);

// b x n matrix whose every column is a permutation of {0..b-1}.
struct ShuffleMatrix {
  int b = 0;
  int n = 0;
  std::vector<int> r;  // row-major

  int operator()(int row, int view) const { return r[static_cast<std::size_t>(row) * n + view]; }
  bool valid() const;
  static ShuffleMatrix identity(int b, int n);
};

ShuffleMatrix gen_shuffle_matrix(int b, int n, std::mt19937_64& rng);

struct ShuffledBatch {
  std::vector<Window> inputs;
  int n = 0;
  std::vector<int> view_labels;  // b x n, row-major

  int view_label(int i, int j) const { return view_labels[static_cast<std::size_t>(i) * n + j]; }
};

// Shuffled sample i takes view j's channels from batch[R(i, j)] and is
// labelled per view with that donor's label.
ShuffledBatch shuffle_batch(std::span<const Window> batch, const ViewSchema& schema, const ShuffleMatrix& r);

}  // namespace flow
