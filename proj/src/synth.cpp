#include "flow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flow/error.hpp"

namespace flow {

namespace {

constexpr double kPi = std::numbers::pi;

// Carrier attitude and body rate along the segment schedule.
class RateSchedule {
 public:
  explicit RateSchedule(const SynthSpec& spec) : spec_(spec) {
    for (const auto& s : spec.rate_segments) period_ += s.duration_s;
  }

  // Rate in effect at time t (segments are half-open [start, end)).
  Vec3 rate_at(double t) const {
    if (spec_.rate_segments.empty() || period_ <= 0.0) return {};
    if (!spec_.repeat_segments && t >= period_) return {};
    double local = spec_.repeat_segments ? std::fmod(t, period_) : t;
    for (const auto& s : spec_.rate_segments) {
      if (local < s.duration_s) return s.body_rate;
      local -= s.duration_s;
    }
    return spec_.rate_segments.back().body_rate;
  }

  // Exact integration of the piecewise-constant rate over [t0, t1].
  Quaternion advance(Quaternion q, double t0, double t1) const {
    double t = t0;
    while (t < t1) {
      const double next = std::min(t1, next_boundary(t));
      const Vec3 w = rate_at(t);
      if (w.norm() > 0.0) q = quat_multiply(q, Quaternion::from_rotation_vector(w * (next - t)));
      t = next;
    }
    return q;
  }

 private:
  double next_boundary(double t) const {
    if (spec_.rate_segments.empty() || period_ <= 0.0) return std::numeric_limits<double>::infinity();
    if (!spec_.repeat_segments && t >= period_) return std::numeric_limits<double>::infinity();
    const double cycle_start = spec_.repeat_segments ? std::floor(t / period_) * period_ : 0.0;
    double edge = cycle_start;
    for (const auto& s : spec_.rate_segments) {
      edge += s.duration_s;
      if (edge > t + 1e-12) return edge;
    }
    return cycle_start + period_ + spec_.rate_segments.front().duration_s;
  }

  const SynthSpec& spec_;
  double period_ = 0.0;
};

Vec3 gaussian(std::mt19937_64& rng, double stddev) {
  if (stddev <= 0.0) return {};
  std::normal_distribution<double> n(0.0, stddev);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return {x, y, z};
}

// Random axis, angle uniform in [0, max_angle].
Quaternion random_rotation_within(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis;
  while (axis.norm() < 1e-9) axis = {n(rng), n(rng), n(rng)};
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return Quaternion::from_axis_angle(axis.normalized(), u(rng));
}

}  // namespace

void SynthSpec::validate(double warmup_seconds) const {
  if (!(rate_hz > 0.0)) fail(ErrorKind::Config, "synth: rate_hz must be > 0");
  if (!(duration_s > 0.0)) fail(ErrorKind::Config, "synth: duration_s must be > 0");
  if (duration_s * rate_hz < warmup_seconds * rate_hz)
    fail(ErrorKind::Config, "synth: duration shorter than the warm-up period");
  if (noise.accel < 0.0 || noise.gyro < 0.0 || noise.mag < 0.0)
    fail(ErrorKind::Config, "synth: noise std must be >= 0");
  for (const auto& s : rate_segments)
    if (!(s.duration_s > 0.0) || !s.body_rate.finite())
      fail(ErrorKind::Config, "synth: rate segments need positive duration and finite rate");
  for (const auto& a : linear_accel)
    if (!a.amplitude_ned.finite() || !std::isfinite(a.frequency_hz) || !std::isfinite(a.phase_rad))
      fail(ErrorKind::Config, "synth: non-finite linear acceleration component");
  if (std::abs(initial_attitude.norm() - 1.0) > 1e-6 || std::abs(mounting.norm() - 1.0) > 1e-6)
    fail(ErrorKind::Config, "synth: attitude and mounting must be unit quaternions");
}

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed, int subject_id) {
  spec.validate(0.0);
  std::mt19937_64 rng(seed);
  const RateSchedule schedule(spec);

  const double inc = spec.inclination_deg * kPi / 180.0;
  const Vec3 field_ned{std::cos(inc), 0.0, std::sin(inc)};
  const Vec3 gravity_ned{0.0, 0.0, kStandardGravity};
  const Quaternion mount_inv = spec.mounting.conjugate();

  const auto n = static_cast<std::size_t>(std::floor(spec.duration_s * spec.rate_hz + 1e-9));
  SynthResult out;
  Recording& rec = out.recording;
  rec.subject_id = subject_id;
  rec.session = spec.name.empty() ? "synth" : spec.name;
  rec.sample_rate_hz = spec.rate_hz;
  rec.sensor_names = {"imu"};
  rec.sensors.resize(1);
  rec.sensors[0].reserve(n);
  out.ground_truth.reserve(n);

  Quaternion carrier = spec.initial_attitude.normalized();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / spec.rate_hz;
    if (k > 0) carrier = schedule.advance(carrier, static_cast<double>(k - 1) / spec.rate_hz, t);
    const Quaternion sensor = quat_multiply(carrier, spec.mounting);
    const Quaternion sensor_inv = sensor.conjugate();

    Vec3 linear;
    for (const auto& c : spec.linear_accel)
      linear += c.amplitude_ned * std::sin(2.0 * kPi * c.frequency_hz * t + c.phase_rad);

    LocalSample s;
    s.timestamp = t;
    s.a = sensor_inv.rotate(linear - gravity_ned) + gaussian(rng, spec.noise.accel);
    s.g = mount_inv.rotate(schedule.rate_at(t)) + gaussian(rng, spec.noise.gyro);
    s.m = sensor_inv.rotate(field_ned) + gaussian(rng, spec.noise.mag);
    rec.sensors[0].push_back(s);
    rec.raw_labels.push_back(spec.label);
    rec.labels.push_back(spec.label);
    rec.valid.push_back(1);
    out.ground_truth.push_back(sensor);
  }
  return out;
}

Quaternion random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng);
  const double u2 = u(rng);
  const double u3 = u(rng);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return Quaternion{a * std::sin(2 * kPi * u2), a * std::cos(2 * kPi * u2), b * std::sin(2 * kPi * u3),
                    b * std::cos(2 * kPi * u3)}
      .normalized();
}

SynthPopulation synth_population(int num_users, std::span<const SynthSpec> activities,
                                 std::uint64_t seed, const PopulationOptions& options) {
  if (num_users < 2) fail(ErrorKind::Config, "synth_population: need at least 2 users");
  if (activities.empty()) fail(ErrorKind::Config, "synth_population: no activity templates");

  std::mt19937_64 rng(seed);
  const double min_sep = options.min_mounting_separation_deg * kPi / 180.0;
  SynthPopulation pop;
  constexpr int kMaxAttempts = 100000;
  for (int u = 0; u < num_users; ++u) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts)
        fail(ErrorKind::Config, "synth_population: cannot place mountings that far apart");
      const Quaternion candidate = options.max_mounting_angle_deg >= 180.0
                                       ? random_rotation(rng)
                                       : random_rotation_within(rng, options.max_mounting_angle_deg * kPi / 180.0);
      bool ok = true;
      for (const auto& m : pop.mountings) ok &= quat_angle_between(m, candidate) >= min_sep;
      if (ok) {
        pop.mountings.push_back(candidate);
        break;
      }
    }
  }

  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int u = 0; u < num_users; ++u) {
    const double amp = 1.0 + options.amplitude_jitter * jitter(rng);
    const double tempo = 1.0 + options.tempo_jitter * jitter(rng);
    for (std::size_t a = 0; a < activities.size(); ++a) {
      SynthSpec spec = activities[a];
      spec.mounting = pop.mountings[static_cast<std::size_t>(u)];
      if (options.session_mounting_jitter_deg > 0.0) {
        const Quaternion dir = random_rotation(rng);
        Vec3 axis{dir.x, dir.y, dir.z};
        if (axis.norm() < 1e-9) axis = {1.0, 0.0, 0.0};
        const double angle = options.session_mounting_jitter_deg * kPi / 180.0 * 0.5 * (jitter(rng) + 1.0);
        spec.mounting = quat_multiply(spec.mounting, Quaternion::from_axis_angle(axis.normalized(), angle));
      }
      if (options.random_heading) {
        const double yaw = 2.0 * kPi * (0.5 * (jitter(rng) + 1.0));
        spec.initial_attitude = quat_multiply(Quaternion::from_axis_angle({0.0, 0.0, 1.0}, yaw), spec.initial_attitude);
      }
      for (auto& seg : spec.rate_segments) {
        seg.body_rate *= amp * tempo;
        seg.duration_s /= tempo;
      }
      for (auto& c : spec.linear_accel) {
        c.amplitude_ned *= amp;
        c.frequency_hz *= tempo;
      }
      const std::uint64_t stream = rng();
      SynthResult r = synth_generate(spec, stream, u + 1);
      r.recording.session = "user" + std::to_string(u + 1) + "_" + (spec.name.empty() ? std::to_string(a) : spec.name);
      pop.recordings.push_back(std::move(r.recording));
      pop.ground_truth.push_back(std::move(r.ground_truth));
    }
  }
  return pop;
}

std::vector<SynthSpec> default_activity_templates(double duration_s, double rate_hz, NoiseStd noise,
                                                  double heading_rate) {
  auto base = [&](std::string name, int label) {
    SynthSpec s;
    s.name = std::move(name);
    s.label = label;
    s.duration_s = duration_s;
    s.rate_hz = rate_hz;
    s.noise = noise;
    return s;
  };
  std::vector<SynthSpec> out;

  SynthSpec bounce = base("bounce", 0);
  bounce.linear_accel = {{{0.0, 0.0, 3.0}, 1.8, 0.0}};
  out.push_back(bounce);

  SynthSpec sway = base("sway", 1);
  sway.linear_accel = {{{3.0, 0.0, 0.0}, 1.8, 0.0}};
  out.push_back(sway);

  SynthSpec turn = base("turn", 2);
  turn.rate_segments = {{0.6, {0.0, 0.0, 0.8}}, {0.6, {0.0, 0.0, -0.8}}};
  out.push_back(turn);

  SynthSpec rock = base("rock", 3);
  rock.rate_segments = {{0.6, {0.8, 0.0, 0.0}}, {0.6, {-0.8, 0.0, 0.0}}};
  out.push_back(rock);

  for (auto& s : out) {
    if (s.rate_segments.empty()) s.rate_segments = {{duration_s, {}}};
    for (auto& seg : s.rate_segments) seg.body_rate.z += heading_rate;
  }
  return out;
}

}  // namespace flow
