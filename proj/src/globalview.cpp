#include "flow/globalview.hpp"

#include <algorithm>
#include <cmath>

#include "flow/error.hpp"

namespace flow {

Vec3 RotationMatrix::apply(const Vec3& v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Vec3 RotationMatrix::apply_transpose(const Vec3& v) const {
  return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
          m[1] * v.x + m[4] * v.y + m[7] * v.z,
          m[2] * v.x + m[5] * v.y + m[8] * v.z};
}

RotationMatrix RotationMatrix::transpose() const {
  return {{m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]}};
}

double RotationMatrix::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

double RotationMatrix::orthogonality_error() const {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += (*this)(k, i) * (*this)(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
  RotationMatrix r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i * 3 + j] = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

RotationMatrix rotation_from_quaternion(const Quaternion& q) {
  if (!q.finite() || std::abs(q.norm() - 1.0) > 1e-6)
    fail(ErrorKind::InvalidInput, "rotation_from_quaternion: quaternion is not unit norm");
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {{1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y,
           2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x,
           2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y}};
}

std::array<double, GlobalSample::kChannels> GlobalSample::channels() const {
  return {a.x, a.y, a.z, m.x, m.y, m.z, g.x, g.y, g.z, q.w, q.x, q.y, q.z};
}

std::array<double, kLocalChannels> local_channels(const LocalSample& s) {
  return {s.a.x, s.a.y, s.a.z, s.m.x, s.m.y, s.m.z, s.g.x, s.g.y, s.g.z};
}

GlobalSample transform_sample(const LocalSample& s, const Quaternion& q) {
  const RotationMatrix rot = rotation_from_quaternion(q);
  return {rot.apply(s.a), rot.apply(s.m), rot.apply(s.g), q, s.timestamp};
}

std::size_t warmup_samples(const MahonyParams& params) {
  const double n = params.warmup_seconds * params.sample_rate_hz;
  // Tolerate representation error so that 1.0 s at 30 Hz trims exactly 30.
  return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

McResult mc_transform(std::span<const LocalSample> series, const MahonyParams& params) {
  params.validate();
  const std::size_t trim = warmup_samples(params);
  if (series.size() <= trim)
    fail(ErrorKind::InsufficientData, "mc_transform: series of " + std::to_string(series.size()) +
                                          " samples does not outlast the " + std::to_string(trim) +
                                          "-sample warm-up");
  const std::vector<Quaternion> attitude = mahony_run(series, params);

  McResult out;
  out.trimmed = trim;
  out.local.assign(series.begin() + static_cast<std::ptrdiff_t>(trim), series.end());
  out.global.reserve(out.local.size());
  for (std::size_t i = trim; i < series.size(); ++i)
    out.global.push_back(transform_sample(series[i], attitude[i]));
  return out;
}

}  // namespace flow
