#include "flow/attitude.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "flow/error.hpp"

namespace flow {

namespace {

constexpr double kUnitTolerance = 1e-6;
// sin(1 deg): accel/mag closer to parallel than this cannot fix heading.
const double kMinTriadSine = std::sin(std::numbers::pi / 180.0);

void require_unit(const Quaternion& q, const char* what) {
  if (!q.finite()) fail(ErrorKind::InvalidInput, std::string(what) + ": non-finite quaternion");
  if (std::abs(q.norm() - 1.0) > kUnitTolerance)
    fail(ErrorKind::InvalidInput, std::string(what) + ": quaternion is not unit norm");
}

Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// Row-major rotation matrix to quaternion (Shepperd's method).
Quaternion from_matrix(const std::array<double, 9>& r) {
  const double trace = r[0] + r[4] + r[8];
  Quaternion q;
  if (trace > 0.0) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q = {0.25 * s, (r[7] - r[5]) / s, (r[2] - r[6]) / s, (r[3] - r[1]) / s};
  } else if (r[0] > r[4] && r[0] > r[8]) {
    const double s = 2.0 * std::sqrt(1.0 + r[0] - r[4] - r[8]);
    q = {(r[7] - r[5]) / s, 0.25 * s, (r[1] + r[3]) / s, (r[2] + r[6]) / s};
  } else if (r[4] > r[8]) {
    const double s = 2.0 * std::sqrt(1.0 + r[4] - r[0] - r[8]);
    q = {(r[2] - r[6]) / s, (r[1] + r[3]) / s, 0.25 * s, (r[5] + r[7]) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r[8] - r[0] - r[4]);
    q = {(r[3] - r[1]) / s, (r[2] + r[6]) / s, (r[5] + r[7]) / s, 0.25 * s};
  }
  if (q.w < 0.0) q = {-q.w, -q.x, -q.y, -q.z};
  return q.normalized();
}

// Columns of the body-to-NED matrix expressed as rows of its transpose.
struct BodyAxes {
  Vec3 north;  // M^T e_N
  Vec3 east;   // M^T e_E
  Vec3 down;   // M^T e_D
};

BodyAxes body_axes(const Quaternion& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  // Rows of M are the NED axes expressed in body coordinates.
  return {{1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * x * z + 2 * w * y},
          {2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x},
          {2 * x * z - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y}};
}

}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::DegenerateInit: return "degenerate-init";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::SpecMismatch: return "spec-mismatch";
    case ErrorKind::ChannelUnusable: return "channel-unusable";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

bool Vec3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::InvalidInput, "cannot normalize zero or non-finite vector");
  return {x / n, y / n, z / n};
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 u = axis.normalized();
  const double s = std::sin(0.5 * angle);
  return Quaternion{std::cos(0.5 * angle), u.x * s, u.y * s, u.z * s}.normalized();
}

Quaternion Quaternion::from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-300) return identity();
  return from_axis_angle(rv, angle);
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

bool Quaternion::finite() const {
  return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Quaternion Quaternion::normalized() const {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorKind::InvalidInput, "cannot normalize zero or non-finite quaternion");
  return {w / n, x / n, y / n, z / n};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
  const Quaternion p{0.0, v.x, v.y, v.z};
  const Quaternion r = hamilton(hamilton(*this, p), conjugate());
  return {r.x, r.y, r.z};
}

Quaternion quat_multiply(const Quaternion& a, const Quaternion& b) {
  require_unit(a, "quat_multiply");
  require_unit(b, "quat_multiply");
  return hamilton(a, b).normalized();
}

double quat_angle_between(const Quaternion& a, const Quaternion& b) {
  const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z) /
                   (a.norm() * b.norm());
  return 2.0 * std::acos(std::min(1.0, d));
}

Quaternion quat_from_accel_mag(const Vec3& accel, const Vec3& mag) {
  if (!accel.finite() || !mag.finite()) fail(ErrorKind::InvalidInput, "quat_from_accel_mag: non-finite input");
  const double an = accel.norm();
  const double mn = mag.norm();
  if (an == 0.0 || mn == 0.0) fail(ErrorKind::DegenerateInit, "quat_from_accel_mag: zero-length reference vector");

  // Specific force at rest points up, so body-frame down is -accel.
  const Vec3 down = accel * (-1.0 / an);
  const Vec3 east_raw = down.cross(mag * (1.0 / mn));
  if (east_raw.norm() < kMinTriadSine)
    fail(ErrorKind::DegenerateInit, "quat_from_accel_mag: accel and mag are nearly parallel");
  const Vec3 east = east_raw.normalized();
  const Vec3 north = east.cross(down);

  // M has the NED axes (in body coordinates) as rows.
  return from_matrix({north.x, north.y, north.z, east.x, east.y, east.z, down.x, down.y, down.z});
}

void MahonyParams::validate() const {
  if (!(kp > 0.0)) fail(ErrorKind::Config, "mahony: kp must be > 0");
  if (!(ki >= 0.0)) fail(ErrorKind::Config, "mahony: ki must be >= 0");
  if (!(sample_rate_hz > 0.0)) fail(ErrorKind::Config, "mahony: sample_rate_hz must be > 0");
  if (!(warmup_seconds >= 0.0)) fail(ErrorKind::Config, "mahony: warmup_seconds must be >= 0");
}

MahonyState mahony_step(const MahonyState& state, const Vec3& accel,
                        const Vec3& gyro, const Vec3& mag,
                        const MahonyParams& params) {
  if (!accel.finite() || !gyro.finite() || !mag.finite())
    fail(ErrorKind::InvalidInput, "mahony_step: non-finite sensor reading");
  if (!state.q.finite() || !state.integral_error.finite())
    fail(ErrorKind::InvalidInput, "mahony_step: non-finite filter state");
  if (!(params.sample_rate_hz > 0.0)) fail(ErrorKind::InvalidInput, "mahony_step: sample rate must be > 0");

  const BodyAxes axes = body_axes(state.q);
  Vec3 error;

  const double an = accel.norm();
  if (an > 0.0) {
    // Expected specific-force direction at rest: M^T (0, 0, -1).
    const Vec3 predicted = -axes.down;
    error += (accel * (1.0 / an)).cross(predicted);
  }

  const double mn = mag.norm();
  if (mn > 0.0) {
    const Vec3 m = mag * (1.0 / mn);
    Vec3 reference_ned;
    if (params.mag_reference == MagReference::HorizontalProjection) {
      const Vec3 h{axes.north.dot(m), axes.east.dot(m), axes.down.dot(m)};
      reference_ned = {std::hypot(h.x, h.y), 0.0, h.z};
    } else {
      const double inc = params.fixed_inclination_deg * std::numbers::pi / 180.0;
      reference_ned = {std::cos(inc), 0.0, std::sin(inc)};
    }
    const double rn = reference_ned.norm();
    if (rn > 0.0) {
      reference_ned *= 1.0 / rn;
      const Vec3 predicted = axes.north * reference_ned.x + axes.east * reference_ned.y +
                             axes.down * reference_ned.z;
      error += m.cross(predicted);
    }
  }

  const double dt = params.dt();
  MahonyState next = state;
  Vec3 omega = gyro + error * params.kp;
  if (params.ki > 0.0) {
    next.integral_error += error * dt;
    omega += next.integral_error * params.ki;
  }

  const Quaternion& q = state.q;
  const Quaternion q_dot = hamilton(q, {0.0, omega.x, omega.y, omega.z});
  next.q = Quaternion{q.w + 0.5 * dt * q_dot.w, q.x + 0.5 * dt * q_dot.x,
                      q.y + 0.5 * dt * q_dot.y, q.z + 0.5 * dt * q_dot.z}
               .normalized();
  ++next.steps;
  return next;
}

std::vector<Quaternion> mahony_run(std::span<const LocalSample> series,
                                   const MahonyParams& params) {
  if (series.empty()) fail(ErrorKind::InvalidInput, "mahony_run: empty series");
  // Zero gains are allowed here (pure gyro integration); configurations are
  // held to kp > 0 by validate().
  if (!(params.kp >= 0.0) || !(params.ki >= 0.0) || !(params.sample_rate_hz > 0.0))
    fail(ErrorKind::Config, "mahony_run: gains must be >= 0 and the sample rate > 0");

  MahonyState state;
  try {
    state.q = quat_from_accel_mag(series.front().a, series.front().m);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateInit) throw;
    state.q = Quaternion::identity();
  }

  std::vector<Quaternion> out;
  out.reserve(series.size());
  for (const LocalSample& s : series) {
    state = mahony_step(state, s.a, s.g, s.m, params);
    out.push_back(state.q);
  }
  return out;
}

}  // namespace flow
