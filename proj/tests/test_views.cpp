#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "flow/error.hpp"
#include "flow/views.hpp"
#include "support.hpp"

using namespace flow;
using namespace flow::testing;

namespace {

// Window whose every value encodes (sample, channel) so that any slice can be
// traced back to its donor.
std::vector<Window> tagged_batch(int b, int steps, int channels) {
  std::vector<Window> batch;
  for (int i = 0; i < b; ++i) {
    Window w;
    w.steps = steps;
    w.channels = channels;
    w.label = 10 + i;
    w.subject_id = 1;
    for (int t = 0; t < steps; ++t)
      for (int c = 0; c < channels; ++c) w.values.push_back(1000.0 * i + 10.0 * c + 0.01 * t);
    batch.push_back(std::move(w));
  }
  return batch;
}

std::vector<double> view_slice(const Window& w, const std::vector<int>& channels) {
  std::vector<double> out;
  for (int t = 0; t < w.steps; ++t)
    for (int c : channels) out.push_back(w.at(t, c));
  return out;
}

}  // namespace

TEST(Schema, ViewCounts) {
  EXPECT_EQ(build_schema(Granularity::Medium, {3, ViewSet::LocalGlobal}).n(), 6);
  EXPECT_EQ(build_schema(Granularity::Small, {1, ViewSet::LocalGlobal}).n(), 7);
  EXPECT_EQ(build_schema(Granularity::Large, {5, ViewSet::LocalGlobal}).n(), 2);
  EXPECT_EQ(build_schema(Granularity::JustLocal, {3, ViewSet::LocalGlobal}).n(), 3);
  EXPECT_EQ(build_schema(Granularity::JustLocal, {2, ViewSet::Local}).n(), 2);
}

TEST(Schema, SmallGroupsForOneSensor) {
  const ViewSchema s = build_schema(Granularity::Small, {1, ViewSet::LocalGlobal});
  EXPECT_EQ(s.num_channels, 22);
  EXPECT_EQ(s.views[0], (std::vector<int>{0, 1, 2}));       // a
  EXPECT_EQ(s.views[1], (std::vector<int>{3, 4, 5}));       // m
  EXPECT_EQ(s.views[2], (std::vector<int>{6, 7, 8}));       // g
  EXPECT_EQ(s.views[3], (std::vector<int>{9, 10, 11}));     // a'
  EXPECT_EQ(s.views[4], (std::vector<int>{12, 13, 14}));    // m'
  EXPECT_EQ(s.views[5], (std::vector<int>{15, 16, 17}));    // g'
  EXPECT_EQ(s.views[6], (std::vector<int>{19, 20, 21, 18}));  // qx qy qz qw
}

TEST(Schema, ViewsPartitionChannels) {
  for (auto g : {Granularity::Small, Granularity::Medium, Granularity::Large}) {
    for (int m : {1, 3, 5}) {
      const ViewSchema s = build_schema(g, {m, ViewSet::LocalGlobal});
      std::vector<int> all;
      for (const auto& v : s.views) all.insert(all.end(), v.begin(), v.end());
      std::sort(all.begin(), all.end());
      std::vector<int> expected(22 * m);
      std::iota(expected.begin(), expected.end(), 0);
      EXPECT_EQ(all, expected);
    }
  }
}

TEST(Schema, MediumOrderIsSensorMajorLocalFirst) {
  const ViewSchema s = build_schema(Granularity::Medium, {2, ViewSet::LocalGlobal});
  EXPECT_EQ(s.views[0].front(), 0);
  EXPECT_EQ(s.views[0].size(), 9u);
  EXPECT_EQ(s.views[1].front(), 9);
  EXPECT_EQ(s.views[1].size(), 13u);
  EXPECT_EQ(s.views[2].front(), 22);
  EXPECT_EQ(s.views[3].front(), 31);
}

TEST(Schema, GlobalGranularityNeedsGlobalChannels) {
  try {
    build_schema(Granularity::Medium, {1, ViewSet::Local});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
  }
  EXPECT_THROW(build_schema(Granularity::Large, {1, ViewSet::Global}), Error);
}

TEST(Granularity, NamesRoundTrip) {
  for (auto g : {Granularity::JustLocal, Granularity::Small, Granularity::Medium, Granularity::Large})
    EXPECT_EQ(parse_granularity(to_string(g)), g);
  EXPECT_THROW(parse_granularity("huge"), Error);
}

TEST(ShuffleMatrixGen, SingleSampleIsZeros) {
  std::mt19937_64 rng(1);
  const ShuffleMatrix r = gen_shuffle_matrix(1, 5, rng);
  EXPECT_EQ(r.r, std::vector<int>(5, 0));
}

TEST(ShuffleMatrixGen, ColumnsArePermutations) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + trial % 9, n = 1 + trial % 4;
    const ShuffleMatrix r = gen_shuffle_matrix(b, n, rng);
    EXPECT_TRUE(r.valid());
    for (int j = 0; j < n; ++j) {
      std::vector<int> col;
      for (int i = 0; i < b; ++i) col.push_back(r(i, j));
      std::sort(col.begin(), col.end());
      for (int i = 0; i < b; ++i) EXPECT_EQ(col[i], i);
    }
  }
}

TEST(ShuffleMatrixGen, Deterministic) {
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(gen_shuffle_matrix(16, 6, a).r, gen_shuffle_matrix(16, 6, b).r);
}

TEST(ShuffleMatrixGen, ValidRejectsDuplicates) {
  ShuffleMatrix r{3, 1, {0, 0, 2}};
  EXPECT_FALSE(r.valid());
  EXPECT_TRUE(ShuffleMatrix::identity(3, 2).valid());
}

TEST(ShuffleBatch, WorkedExample) {
  // One channel per view keeps the bookkeeping readable.
  ViewSchema schema;
  schema.views = {{0}, {1}, {2}};
  schema.num_channels = 3;
  const auto batch = tagged_batch(4, 2, 3);
  const ShuffleMatrix r{4, 3, {2, 3, 0, 0, 2, 1, 1, 0, 2, 3, 1, 3}};
  const ShuffledBatch out = shuffle_batch(batch, schema, r);
  // expected donor of view j for each shuffled sample
  const int donors[4][3] = {{2, 3, 0}, {0, 2, 1}, {1, 0, 2}, {3, 1, 3}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(view_slice(out.inputs[i], schema.views[j]), view_slice(batch[donors[i][j]], schema.views[j]));
      EXPECT_EQ(out.view_label(i, j), 10 + donors[i][j]);
    }
  }
  // first row of the worked example: labels y3, y4, y1 (1-based)
  EXPECT_EQ(out.view_label(0, 0), batch[2].label);
  EXPECT_EQ(out.view_label(0, 1), batch[3].label);
  EXPECT_EQ(out.view_label(0, 2), batch[0].label);
}

TEST(ShuffleBatch, IdentityRoundTrip) {
  const ViewSchema schema = build_schema(Granularity::Small, {2, ViewSet::LocalGlobal});
  const auto batch = tagged_batch(5, 3, 44);
  const ShuffledBatch out = shuffle_batch(batch, schema, ShuffleMatrix::identity(5, schema.n()));
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(out.inputs[i].values, batch[i].values);
    EXPECT_EQ(out.inputs[i].label, batch[i].label);
    for (int j = 0; j < schema.n(); ++j) EXPECT_EQ(out.view_label(i, j), batch[i].label);
  }
}

TEST(ShuffleBatch, ConservationAndLabelAlignment) {
  const ViewSchema schema = build_schema(Granularity::Medium, {2, ViewSet::LocalGlobal});
  const auto batch = tagged_batch(8, 4, 44);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const ShuffleMatrix r = gen_shuffle_matrix(8, schema.n(), rng);
    const ShuffledBatch out = shuffle_batch(batch, schema, r);
    for (int j = 0; j < schema.n(); ++j) {
      std::multiset<std::vector<double>> before, after;
      for (int i = 0; i < 8; ++i) {
        before.insert(view_slice(batch[i], schema.views[j]));
        after.insert(view_slice(out.inputs[i], schema.views[j]));
        EXPECT_EQ(view_slice(out.inputs[i], schema.views[j]), view_slice(batch[r(i, j)], schema.views[j]));
        EXPECT_EQ(out.view_label(i, j), batch[r(i, j)].label);
      }
      EXPECT_EQ(before, after);
    }
  }
}

TEST(ShuffleBatch, UnlistedChannelsStayWithTheirSample) {
  const ViewSchema schema = build_schema(Granularity::JustLocal, {1, ViewSet::LocalGlobal});
  const auto batch = tagged_batch(3, 2, 22);
  const ShuffleMatrix r{3, 1, {1, 2, 0}};
  const ShuffledBatch out = shuffle_batch(batch, schema, r);
  std::vector<int> global(13);
  std::iota(global.begin(), global.end(), 9);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(view_slice(out.inputs[i], global), view_slice(batch[i], global));
}

TEST(ShuffleBatch, RejectsMismatch) {
  const ViewSchema schema = build_schema(Granularity::Medium, {1, ViewSet::LocalGlobal});
  const auto batch = tagged_batch(3, 2, 22);
  EXPECT_THROW(shuffle_batch(batch, schema, ShuffleMatrix::identity(4, 2)), Error);
  EXPECT_THROW(shuffle_batch(tagged_batch(3, 2, 21), schema, ShuffleMatrix::identity(3, 2)), Error);
  EXPECT_THROW(shuffle_batch(std::span<const Window>{}, schema, ShuffleMatrix::identity(1, 2)), Error);
}
