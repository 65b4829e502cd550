#include "flow/views.hpp"

#include <algorithm>
#include <numeric>

#include "flow/error.hpp"

namespace flow {

namespace {

std::vector<int> iota_range(int start, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace

const char* to_string(Granularity g) {
  switch (g) {
    case Granularity::JustLocal: return "just_local";
    case Granularity::Small: return "small";
    case Granularity::Medium: return "medium";
    case Granularity::Large: return "large";
  }
  return "unknown";
}

Granularity parse_granularity(const std::string& s) {
  if (s == "just_local") return Granularity::JustLocal;
  if (s == "small") return Granularity::Small;
  if (s == "medium") return Granularity::Medium;
  if (s == "large") return Granularity::Large;
  fail(ErrorKind::Config, "unknown granularity '" + s + "' (expected just_local, small, medium or large)");
}

int ChannelLayout::local_offset(int sensor) const {
  return sensor * channels_per_sensor(set);
}

int ChannelLayout::global_offset(int sensor) const {
  return sensor * channels_per_sensor(set) + (has_local() ? kLocalChannels : 0);
}

ViewSchema build_schema(Granularity granularity, const ChannelLayout& layout) {
  if (layout.num_sensors < 1) fail(ErrorKind::Schema, "build_schema: layout has no sensors");
  if (!layout.has_local()) fail(ErrorKind::Schema, "build_schema: every granularity needs local channels");
  if (granularity != Granularity::JustLocal && !layout.has_global())
    fail(ErrorKind::Schema, std::string("build_schema: granularity '") + to_string(granularity) +
                                "' needs global channels but the layout is local-only");

  ViewSchema schema;
  schema.granularity = granularity;
  schema.num_channels = layout.channels();
  const int m = layout.num_sensors;
  switch (granularity) {
    case Granularity::JustLocal:
      for (int s = 0; s < m; ++s) schema.views.push_back(iota_range(layout.local_offset(s), kLocalChannels));
      break;
    case Granularity::Small:
      for (int s = 0; s < m; ++s) {
        const int l = layout.local_offset(s);
        const int g = layout.global_offset(s);
        for (int k = 0; k < 3; ++k) schema.views.push_back(iota_range(l + 3 * k, 3));
        for (int k = 0; k < 3; ++k) schema.views.push_back(iota_range(g + 3 * k, 3));
        // Quaternion group listed as [qx, qy, qz, qw]; stored as w, x, y, z.
        schema.views.push_back({g + 10, g + 11, g + 12, g + 9});
      }
      break;
    case Granularity::Medium:
      for (int s = 0; s < m; ++s) {
        schema.views.push_back(iota_range(layout.local_offset(s), kLocalChannels));
        schema.views.push_back(iota_range(layout.global_offset(s), GlobalSample::kChannels));
      }
      break;
    case Granularity::Large: {
      std::vector<int> local, global;
      for (int s = 0; s < m; ++s) {
        for (int c : iota_range(layout.local_offset(s), kLocalChannels)) local.push_back(c);
        for (int c : iota_range(layout.global_offset(s), GlobalSample::kChannels)) global.push_back(c);
      }
      schema.views = {std::move(local), std::move(global)};
      break;
    }
  }
  return schema;
}

bool ShuffleMatrix::valid() const {
  if (b < 1 || n < 1 || r.size() != static_cast<std::size_t>(b) * n) return false;
  std::vector<char> seen(static_cast<std::size_t>(b));
  for (int j = 0; j < n; ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    for (int i = 0; i < b; ++i) {
      const int v = (*this)(i, j);
      if (v < 0 || v >= b || seen[static_cast<std::size_t>(v)]) return false;
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
  return true;
}

ShuffleMatrix ShuffleMatrix::identity(int b, int n) {
  ShuffleMatrix m{b, n, std::vector<int>(static_cast<std::size_t>(b) * n)};
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < n; ++j) m.r[static_cast<std::size_t>(i) * n + j] = i;
  return m;
}

ShuffleMatrix gen_shuffle_matrix(int b, int n, std::mt19937_64& rng) {
  if (b < 1 || n < 1) fail(ErrorKind::InvalidInput, "gen_shuffle_matrix: b and n must be >= 1");
  ShuffleMatrix m = ShuffleMatrix::identity(b, n);
  std::vector<int> perm(static_cast<std::size_t>(b));
  for (int j = 0; j < n; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with an explicit draw so the sequence does not depend on
    // the standard library's shuffle implementation.
    for (int i = b - 1; i > 0; --i) {
      const auto k = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)]);
    }
    for (int i = 0; i < b; ++i) m.r[static_cast<std::size_t>(i) * n + j] = perm[static_cast<std::size_t>(i)];
  }
  return m;
}

ShuffledBatch shuffle_batch(std::span<const Window> batch, const ViewSchema& schema, const ShuffleMatrix& r) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) fail(ErrorKind::InvalidInput, "shuffle_batch: empty batch");
  if (r.b != b || r.n != schema.n() || !r.valid())
    fail(ErrorKind::InvalidInput, "shuffle_batch: shuffle matrix does not match batch and schema");
  const int steps = batch.front().steps;
  const int channels = batch.front().channels;
  if (channels != schema.num_channels)
    fail(ErrorKind::InvalidInput, "shuffle_batch: window channel count does not match schema");
  for (const auto& w : batch)
    if (w.steps != steps || w.channels != channels)
      fail(ErrorKind::InvalidInput, "shuffle_batch: windows differ in shape");

  ShuffledBatch out;
  out.n = schema.n();
  out.inputs.assign(batch.begin(), batch.end());
  out.view_labels.resize(static_cast<std::size_t>(b) * out.n);
  for (int i = 0; i < b; ++i) {
    Window& dst = out.inputs[static_cast<std::size_t>(i)];
    for (int j = 0; j < out.n; ++j) {
      const Window& src = batch[static_cast<std::size_t>(r(i, j))];
      out.view_labels[static_cast<std::size_t>(i) * out.n + j] = src.label;
      for (int t = 0; t < steps; ++t) {
        const std::size_t row = static_cast<std::size_t>(t) * channels;
        for (int c : schema.views[static_cast<std::size_t>(j)]) dst.values[row + c] = src.values[row + c];
      }
    }
    // A shuffled sample has no single label; keep view 0's for bookkeeping.
    dst.label = out.view_labels[static_cast<std::size_t>(i) * out.n];
  }
  return out;
}

}  // namespace flow
