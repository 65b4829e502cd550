#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flow/attitude.hpp"
#include "flow/error.hpp"
#include "flow/globalview.hpp"
#include "flow/synth.hpp"
#include "support.hpp"

using namespace flow;
using namespace flow::testing;

namespace {

void expect_quat_near(const Quaternion& a, const Quaternion& b, double tol) {
  // q and -q are the same rotation
  const double sign = (a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z) < 0 ? -1.0 : 1.0;
  EXPECT_NEAR(a.w, sign * b.w, tol);
  EXPECT_NEAR(a.x, sign * b.x, tol);
  EXPECT_NEAR(a.y, sign * b.y, tol);
  EXPECT_NEAR(a.z, sign * b.z, tol);
}

// Rodrigues' formula, written independently of the library.
std::array<double, 9> axis_angle_matrix(Vec3 axis, double angle) {
  const double n = std::sqrt(axis.dot(axis));
  axis = axis * (1.0 / n);
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

std::array<double, 9> matmul(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return r;
}

// Shepperd's method.
Quaternion matrix_to_quat(const std::array<double, 9>& m) {
  const double tr = m[0] + m[4] + m[8];
  Quaternion q;
  if (tr > 0) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    q = {0.25 * s, (m[7] - m[5]) / s, (m[2] - m[6]) / s, (m[3] - m[1]) / s};
  } else if (m[0] > m[4] && m[0] > m[8]) {
    const double s = 2.0 * std::sqrt(1.0 + m[0] - m[4] - m[8]);
    q = {(m[7] - m[5]) / s, 0.25 * s, (m[1] + m[3]) / s, (m[2] + m[6]) / s};
  } else if (m[4] > m[8]) {
    const double s = 2.0 * std::sqrt(1.0 + m[4] - m[0] - m[8]);
    q = {(m[2] - m[6]) / s, (m[1] + m[3]) / s, 0.25 * s, (m[5] + m[7]) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m[8] - m[0] - m[4]);
    q = {(m[3] - m[1]) / s, (m[2] + m[6]) / s, (m[5] + m[7]) / s, 0.25 * s};
  }
  return q;
}

// Plain Euler integration of q_dot = q (x) (0, w) / 2 with renormalization.
Quaternion integrate_reference(Quaternion q, const Vec3& w, double dt) {
  const double dw = 0.5 * dt * (-q.x * w.x - q.y * w.y - q.z * w.z);
  const double dx = 0.5 * dt * (q.w * w.x + q.y * w.z - q.z * w.y);
  const double dy = 0.5 * dt * (q.w * w.y - q.x * w.z + q.z * w.x);
  const double dz = 0.5 * dt * (q.w * w.z + q.x * w.y - q.y * w.x);
  q = {q.w + dw, q.x + dx, q.y + dy, q.z + dz};
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

}  // namespace

TEST(Quaternion, IdentityIsNeutral) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Quaternion q = random_rotation(rng);
    expect_quat_near(quat_multiply(Quaternion::identity(), q), q, 1e-12);
    expect_quat_near(quat_multiply(q, Quaternion::identity()), q, 1e-12);
  }
}

TEST(Quaternion, InverseGivesIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Quaternion q = random_rotation(rng);
    expect_quat_near(quat_multiply(q, q.conjugate()), Quaternion::identity(), 1e-9);
  }
}

TEST(Quaternion, ComposesLikeRotationMatrices) {
  const double h = std::sqrt(0.5);
  const Quaternion a{h, h, 0, 0};  // 90 deg about x
  const Quaternion b{h, 0, h, 0};  // 90 deg about y
  const auto expected = matrix_to_quat(matmul(axis_angle_matrix({1, 0, 0}, kPi / 2), axis_angle_matrix({0, 1, 0}, kPi / 2)));
  expect_quat_near(quat_multiply(a, b), expected, 1e-9);
  expect_quat_near(quat_multiply(a, b), {0.5, 0.5, 0.5, 0.5}, 1e-9);
}

TEST(Quaternion, RandomProductsMatchMatrixProducts) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const Vec3 ax{nd(rng), nd(rng), nd(rng)}, bx{nd(rng), nd(rng), nd(rng)};
    const double aa = ang(rng), ba = ang(rng);
    const Quaternion p = quat_multiply(Quaternion::from_axis_angle(ax, aa), Quaternion::from_axis_angle(bx, ba));
    expect_quat_near(p, matrix_to_quat(matmul(axis_angle_matrix(ax, aa), axis_angle_matrix(bx, ba))), 1e-9);
    EXPECT_NEAR(p.norm(), 1.0, 1e-12);
  }
}

TEST(Quaternion, RejectsNonUnitInput) {
  EXPECT_THROW(quat_multiply({2, 0, 0, 0}, Quaternion::identity()), Error);
}

TEST(Quaternion, RotateMatchesAxisAngleMatrix) {
  const auto m = axis_angle_matrix({0, 0, 1}, kPi / 2);
  const Vec3 v = Quaternion::from_axis_angle({0, 0, 1}, kPi / 2).rotate({1, 0, 0});
  EXPECT_NEAR(v.x, m[0], 1e-12);
  EXPECT_NEAR(v.y, m[3], 1e-12);
  EXPECT_NEAR(v.z, m[6], 1e-12);
}

TEST(Triad, AlignedReadingGivesIdentity) {
  const double inc = rad(60.0);
  const Quaternion q = quat_from_accel_mag({0, 0, -9.81}, {std::cos(inc), 0, std::sin(inc)});
  expect_quat_near(q, Quaternion::identity(), 1e-6);
}

TEST(Triad, RecoversKnownYaw) {
  const Quaternion yaw = Quaternion::from_axis_angle({0, 0, 1}, kPi / 2);
  const LocalSample s = static_reading(yaw);
  expect_quat_near(quat_from_accel_mag(s.a, s.m), yaw, 1e-9);
}

TEST(Triad, RecoversRandomAttitudes) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Quaternion q = random_rotation(rng);
    const LocalSample s = static_reading(q, 40.0);
    EXPECT_LT(quat_angle_between(quat_from_accel_mag(s.a, s.m), q), 1e-9);
  }
}

TEST(Triad, ParallelVectorsAreDegenerate) {
  try {
    quat_from_accel_mag({0, 0, -9.81}, {0, 0, 1});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInit);
  }
  EXPECT_THROW(quat_from_accel_mag({0, 0, 0}, {1, 0, 0}), Error);
}

TEST(Mahony, FixedPointOnConsistentInput) {
  std::mt19937_64 rng(5);
  MahonyParams p;
  for (int i = 0; i < 20; ++i) {
    const Quaternion q = random_rotation(rng);
    const LocalSample s = static_reading(q);
    MahonyState st;
    st.q = q;
    const MahonyState next = mahony_step(st, s.a, {0, 0, 0}, s.m, p);
    expect_quat_near(next.q, q, 1e-12);
  }
}

TEST(Mahony, FixedPointWithFixedInclinationReference) {
  MahonyParams p;
  p.mag_reference = MagReference::FixedInclination;
  p.fixed_inclination_deg = 60.0;
  std::mt19937_64 rng(6);
  const Quaternion q = random_rotation(rng);
  const LocalSample s = static_reading(q, 60.0);
  MahonyState st;
  st.q = q;
  expect_quat_near(mahony_step(st, s.a, {0, 0, 0}, s.m, p).q, q, 1e-12);
}

TEST(Mahony, ConvergesFromTiltedEstimate) {
  const Quaternion truth = Quaternion::identity();
  const LocalSample s = static_reading(truth);
  MahonyParams p;
  MahonyState st;
  st.q = Quaternion::from_axis_angle({1, 0, 0}, rad(30.0));
  for (int i = 0; i < 1000; ++i) st = mahony_step(st, s.a, {0, 0, 0}, s.m, p);
  const Vec3 est = st.q.rotate({0, 0, 1});
  EXPECT_LT(deg(std::acos(std::clamp(est.z, -1.0, 1.0))), 2.0);
  EXPECT_LT(deg(quat_angle_between(st.q, truth)), 2.0);
}

TEST(Mahony, ConstantRateMatchesClosedForm) {
  MahonyParams p;
  p.kp = 0.0;
  p.ki = 0.0;
  const Vec3 w{0.4, -0.7, 0.5};
  MahonyState st;
  const int steps = static_cast<int>(p.sample_rate_hz);  // one second
  for (int i = 0; i < steps; ++i) st = mahony_step(st, {0, 0, -9.81}, w, {1, 0, 1}, p);
  const Quaternion closed = Quaternion::from_rotation_vector(w * 1.0);
  EXPECT_LT(quat_angle_between(st.q, closed), 1e-3);
}

TEST(Mahony, RunWithoutGainsIsPureGyroIntegration) {
  MahonyParams p;
  p.kp = 0.0;
  p.ki = 0.0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 0.8);
  std::vector<LocalSample> series(200);
  for (auto& s : series) s.g = {nd(rng), nd(rng), nd(rng)};  // zero accel/mag: identity seed
  const auto qs = mahony_run(series, p);
  ASSERT_EQ(qs.size(), series.size());
  Quaternion ref = Quaternion::identity();
  for (std::size_t i = 0; i < series.size(); ++i) {
    ref = integrate_reference(ref, series[i].g, p.dt());
    expect_quat_near(qs[i], ref, 1e-6);
  }
}

TEST(Mahony, RunLengthContract) {
  MahonyParams p;
  for (int n : {1, 2, 17, 90}) {
    const auto series = static_stream(Quaternion::identity(), n, 30.0);
    EXPECT_EQ(mahony_run(series, p).size(), static_cast<std::size_t>(n));
  }
}

TEST(Mahony, StaticAlignedStreamStaysAtIdentity) {
  const auto series = static_stream(Quaternion::identity(), 90, 30.0);
  const auto qs = mahony_run(series, {});
  for (std::size_t i = 1; i < qs.size(); ++i) expect_quat_near(qs[i], Quaternion::identity(), 1e-3);
}

TEST(Mahony, ConvergesForRandomStaticOrientations) {
  std::mt19937_64 rng(8);
  MahonyParams p;
  const int steps = static_cast<int>(2 * p.sample_rate_hz);
  for (int i = 0; i < 100; ++i) {
    const Quaternion q = random_rotation(rng);
    const auto qs = mahony_run(static_stream(q, steps, p.sample_rate_hz), p);
    EXPECT_LT(deg(quat_angle_between(qs.back(), q)), 2.0);
  }
}

TEST(Mahony, TracksSlowQuarterTurn) {
  SynthSpec spec;
  spec.duration_s = 5.0;
  spec.rate_segments = {{5.0, {0.0, 0.0, kPi / 2 / 5.0}}};
  spec.repeat_segments = false;
  const auto res = synth_generate(spec, 1);
  const auto qs = mahony_run(res.recording.sensors[0], {});
  EXPECT_LT(deg(quat_angle_between(qs.back(), res.ground_truth.back())), 3.0);
  const double yaw = 2.0 * std::atan2(res.ground_truth.back().z, res.ground_truth.back().w);
  EXPECT_NEAR(yaw, kPi / 2, 0.05);
}

TEST(Mahony, NormStaysUnit) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  MahonyParams p;
  p.ki = 0.1;
  MahonyState st;
  for (int i = 0; i < 2000; ++i) {
    st = mahony_step(st, {nd(rng), nd(rng), nd(rng) - 9.8}, {nd(rng), nd(rng), nd(rng)}, {nd(rng), nd(rng), nd(rng)}, p);
    ASSERT_NEAR(st.q.norm(), 1.0, 1e-9);
  }
}

TEST(Mahony, ZeroReadingsSkipCorrection) {
  MahonyParams p;
  MahonyState st;
  st.q = Quaternion::from_axis_angle({0, 1, 0}, 0.3);
  const MahonyState next = mahony_step(st, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, p);
  expect_quat_near(next.q, st.q, 1e-15);
}

TEST(MahonyParams, RejectsBadValues) {
  MahonyParams p;
  p.sample_rate_hz = 0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.kp = -1;
  EXPECT_THROW(p.validate(), Error);
}
