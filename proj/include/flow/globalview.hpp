#pragma once

// Basis change from the sensor frame to NED: the global view of a sample is
// [a', m', g', q] = [M a, M m, M g, q] with M the rotation matrix of the
// attitude q estimated by the Mahony filter.

#include <array>
#include <span>
#include <vector>

#include "flow/attitude.hpp"

namespace flow {

// 3x3 row-major rotation matrix.
struct RotationMatrix {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int row, int col) const { return m[row * 3 + col]; }
  Vec3 apply(const Vec3& v) const;
  Vec3 apply_transpose(const Vec3& v) const;
  RotationMatrix transpose() const;
  double determinant() const;
  // Max-abs entry of M^T M - I.
  double orthogonality_error() const;
};

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b);

// Throws InvalidInput if |q| deviates from 1 by more than 1e-6.
RotationMatrix rotation_from_quaternion(const Quaternion& q);

struct GlobalSample {
  Vec3 a;  // NED specific force
  Vec3 m;  // NED magnetic flux
  Vec3 g;  // angular rate expressed in NED axes
  Quaternion q;
  double timestamp = 0.0;

  static constexpr int kChannels = 13;
  // [a'x a'y a'z m'x m'y m'z g'x g'y g'z qw qx qy qz]
  std::array<double, kChannels> channels() const;
};

inline constexpr int kLocalChannels = 9;

// [ax ay az mx my mz gx gy gz]
std::array<double, kLocalChannels> local_channels(const LocalSample& s);

GlobalSample transform_sample(const LocalSample& s, const Quaternion& q);

// Time-aligned local and global views after warm-up trimming.
struct McResult {
  std::vector<LocalSample> local;
  std::vector<GlobalSample> global;
  std::size_t trimmed = 0;
};

// Number of leading samples dropped as filter warm-up.
std::size_t warmup_samples(const MahonyParams& params);

// Mahony + change of basis over a whole continuous recording, dropping the
// first ceil(warmup_seconds * sample_rate_hz) samples of both views. Throws
// InsufficientData if nothing would remain.
McResult mc_transform(std::span<const LocalSample> series, const MahonyParams& params);

}  // namespace flow
