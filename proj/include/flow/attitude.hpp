#pragma once

// Quaternion algebra and the Mahony explicit complementary filter.
//
// Frames: the global frame is North-East-Down. A quaternion q describes the
// sensor attitude; its rotation matrix maps body-frame vectors into NED.
// Accelerometers report specific force, so a sensor at rest with its body
// frame aligned to NED reads (0, 0, -g0).

#include <cstddef>
#include <span>
#include <vector>

namespace flow {

inline constexpr double kStandardGravity = 9.80665;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
  bool finite() const;
  // Throws InvalidInput for a zero vector.
  Vec3 normalized() const;
};

// Hamilton quaternion in (w, x, y, z) order. Operations in this module return
// unit quaternions; the struct itself does not enforce normalization so that
// callers can express and reject non-unit inputs.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }
  // Rotation by `angle` radians about `axis` (need not be unit length).
  static Quaternion from_axis_angle(const Vec3& axis, double angle);
  // exp of the pure quaternion (0, rotation_vector / 2).
  static Quaternion from_rotation_vector(const Vec3& rotation_vector);

  double norm() const;
  bool finite() const;
  Quaternion normalized() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  // Rotates a body-frame vector into the global frame.
  Vec3 rotate(const Vec3& v) const;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

// Hamilton product a ⊗ b, renormalized. Both inputs must be unit within 1e-6.
Quaternion quat_multiply(const Quaternion& a, const Quaternion& b);

// Smallest rotation angle (radians, in [0, pi]) taking a to b; q and -q are
// treated as the same attitude.
double quat_angle_between(const Quaternion& a, const Quaternion& b);

// TRIAD attitude from one accelerometer and one magnetometer reading.
// Throws DegenerateInit when the two vectors are within 1 degree of parallel
// (or either is zero).
Quaternion quat_from_accel_mag(const Vec3& accel, const Vec3& mag);

enum class MagReference {
  // Reference field re-derived each step from the horizontal projection of
  // the measured field; insensitive to local declination and inclination.
  HorizontalProjection,
  // Reference field (cos I, 0, sin I) with a configured inclination I.
  FixedInclination,
};

struct MahonyParams {
  double kp = 1.0;
  double ki = 0.0;
  double sample_rate_hz = 30.0;
  MagReference mag_reference = MagReference::HorizontalProjection;
  double fixed_inclination_deg = 60.0;
  double warmup_seconds = 1.0;

  // Throws Config on violated invariants.
  void validate() const;
  double dt() const { return 1.0 / sample_rate_hz; }
};

struct MahonyState {
  Quaternion q;
  Vec3 integral_error;
  std::size_t steps = 0;
};

// One filter update. A zero-magnitude accel or mag skips that correction.
MahonyState mahony_step(const MahonyState& state, const Vec3& accel,
                        const Vec3& gyro, const Vec3& mag,
                        const MahonyParams& params);

// Nine-axis reading in the sensor body frame (the local view).
struct LocalSample {
  Vec3 a;  // specific force, m/s^2
  Vec3 m;  // magnetic flux, any consistent unit
  Vec3 g;  // angular rate, rad/s
  double timestamp = 0.0;

  bool finite() const { return a.finite() && m.finite() && g.finite(); }
};

// One attitude per input sample. The first sample seeds the filter through
// quat_from_accel_mag (identity on degeneracy) and then every sample,
// including the first, is applied as a filter step.
std::vector<Quaternion> mahony_run(std::span<const LocalSample> series,
                                   const MahonyParams& params);

}  // namespace flow
