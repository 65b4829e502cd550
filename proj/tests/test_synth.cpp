#include <gtest/gtest.h>

#include <cmath>

#include "flow/error.hpp"
#include "flow/globalview.hpp"
#include "flow/synth.hpp"
#include "support.hpp"

using namespace flow;
using namespace flow::testing;

TEST(Synth, StaticCase) {
  SynthSpec spec;
  spec.duration_s = 3.0;
  const auto res = synth_generate(spec, 1);
  ASSERT_EQ(res.recording.length(), 90u);
  for (std::size_t i = 0; i < res.recording.length(); ++i) {
    const LocalSample& s = res.recording.sensors[0][i];
    EXPECT_NEAR(s.a.x, 0.0, 1e-12);
    EXPECT_NEAR(s.a.y, 0.0, 1e-12);
    EXPECT_NEAR(s.a.z, -kStandardGravity, 1e-12);
    EXPECT_EQ(s.g.norm(), 0.0);
    EXPECT_LT(quat_angle_between(res.ground_truth[i], Quaternion::identity()), 1e-12);
  }
}

TEST(Synth, ConstantYawRate) {
  const double w = 0.25;
  SynthSpec spec;
  spec.duration_s = 4.0;
  spec.rate_segments = {{4.0, {0.0, 0.0, w}}};
  const auto res = synth_generate(spec, 1);
  const double t = res.recording.sensors[0].back().timestamp;
  const Quaternion& q = res.ground_truth.back();
  EXPECT_NEAR(2.0 * std::atan2(q.z, q.w), w * t, 1e-9);
  EXPECT_NEAR(q.x, 0.0, 1e-12);
  EXPECT_NEAR(q.y, 0.0, 1e-12);
}

TEST(Synth, GyroSeesBodyRateInSensorFrame) {
  SynthSpec spec;
  spec.duration_s = 2.0;
  spec.rate_segments = {{2.0, {0.1, 0.2, 0.3}}};
  spec.mounting = Quaternion::from_axis_angle({0, 0, 1}, kPi / 2);
  const auto res = synth_generate(spec, 1);
  const Vec3 g = res.recording.sensors[0][10].g;
  // carrier x maps to sensor -y under a quarter turn about z
  EXPECT_NEAR(g.x, 0.2, 1e-12);
  EXPECT_NEAR(g.y, -0.1, 1e-12);
  EXPECT_NEAR(g.z, 0.3, 1e-12);
}

TEST(Synth, Deterministic) {
  SynthSpec spec = default_activity_templates(5.0)[1];
  const auto a = synth_generate(spec, 42), b = synth_generate(spec, 42), c = synth_generate(spec, 43);
  bool differs = false;
  for (std::size_t i = 0; i < a.recording.length(); ++i) {
    EXPECT_EQ(a.recording.sensors[0][i].a, b.recording.sensors[0][i].a);
    EXPECT_EQ(a.recording.sensors[0][i].m, b.recording.sensors[0][i].m);
    EXPECT_EQ(a.recording.sensors[0][i].g, b.recording.sensors[0][i].g);
    differs = differs || !(a.recording.sensors[0][i].a == c.recording.sensors[0][i].a);
  }
  EXPECT_TRUE(differs);
}

TEST(Synth, RejectsInvalidSpec) {
  SynthSpec spec;
  spec.rate_hz = 0.0;
  EXPECT_THROW(synth_generate(spec, 1), Error);
  spec = {};
  spec.duration_s = 0.5;
  EXPECT_THROW(spec.validate(1.0), Error);
}

TEST(Synth, SameMotionTwoMountingsAgreeAfterMc) {
  SynthSpec a = default_activity_templates(8.0, 30.0, {0, 0, 0})[3];
  SynthSpec b = a;
  a.mounting = Quaternion::from_axis_angle({0, 1, 0}, 1.0);
  b.mounting = Quaternion::from_axis_angle({1, 0, 1}, -0.8);
  const McResult ma = mc_transform(synth_generate(a, 1).recording.sensors[0], {});
  const McResult mb = mc_transform(synth_generate(b, 1).recording.sensors[0], {});
  ASSERT_EQ(ma.global.size(), mb.global.size());
  double worst = 0;
  for (std::size_t i = 0; i < ma.global.size(); ++i) {
    const auto ca = ma.global[i].channels(), cb = mb.global[i].channels();
    for (int c = 0; c < 9; ++c) worst = std::max(worst, std::abs(ca[c] - cb[c]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Population, Counts) {
  const auto acts = default_activity_templates(20.0, 30.0);
  const auto pop = synth_population(3, acts, 9);
  ASSERT_EQ(pop.recordings.size(), 12u);
  ASSERT_EQ(pop.mountings.size(), 3u);
  ASSERT_EQ(pop.ground_truth.size(), 12u);
  for (std::size_t i = 0; i < pop.recordings.size(); ++i) {
    EXPECT_EQ(pop.recordings[i].subject_id, static_cast<int>(i / 4) + 1);
    EXPECT_EQ(pop.recordings[i].labels.front(), static_cast<int>(i % 4));
    EXPECT_EQ(pop.recordings[i].length(), 600u);
  }
}

TEST(Population, MountingsAreSeparated) {
  const auto acts = default_activity_templates(2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PopulationOptions opt;
    opt.min_mounting_separation_deg = 10.0;
    const auto pop = synth_population(5, acts, seed, opt);
    for (std::size_t i = 0; i < pop.mountings.size(); ++i)
      for (std::size_t j = i + 1; j < pop.mountings.size(); ++j)
        EXPECT_GE(deg(quat_angle_between(pop.mountings[i], pop.mountings[j])), 10.0);
  }
}

TEST(Population, BoundedMountings) {
  PopulationOptions opt;
  opt.max_mounting_angle_deg = 60.0;
  opt.min_mounting_separation_deg = 30.0;
  const auto acts = default_activity_templates(2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pop = synth_population(3, acts, seed, opt);
    for (std::size_t i = 0; i < pop.mountings.size(); ++i) {
      EXPECT_LE(deg(quat_angle_between(pop.mountings[i], Quaternion::identity())), 60.0 + 1e-9);
      for (std::size_t j = i + 1; j < pop.mountings.size(); ++j)
        EXPECT_GE(deg(quat_angle_between(pop.mountings[i], pop.mountings[j])), 30.0);
    }
  }
}

TEST(Population, Deterministic) {
  const auto acts = default_activity_templates(3.0);
  const auto a = synth_population(3, acts, 5), b = synth_population(3, acts, 5);
  for (std::size_t u = 0; u < a.mountings.size(); ++u) EXPECT_EQ(a.mountings[u], b.mountings[u]);
  for (std::size_t r = 0; r < a.recordings.size(); ++r)
    for (std::size_t i = 0; i < a.recordings[r].length(); ++i)
      ASSERT_EQ(a.recordings[r].sensors[0][i].a, b.recordings[r].sensors[0][i].a);
}

TEST(Population, RejectsSingleUser) {
  const auto acts = default_activity_templates(3.0);
  EXPECT_THROW(synth_population(1, acts, 1), Error);
}

TEST(Population, GroundTruthIsSensorAttitude) {
  const auto acts = default_activity_templates(3.0, 30.0, {0, 0, 0});
  const auto pop = synth_population(2, acts, 3);
  const Recording& rec = pop.recordings[5];
  const Quaternion& q = pop.ground_truth[5][40];
  // noiseless static gravity seen through the ground truth
  const Vec3 a = q.rotate(rec.sensors[0][40].a);
  const Vec3 m = q.rotate(rec.sensors[0][40].m);
  EXPECT_NEAR(m.y, 0.0, 1e-9);
  EXPECT_GT(a.norm(), 0.0);
}
