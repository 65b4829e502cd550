#pragma once

// Synthetic rigid-body IMU generator with exact ground-truth attitude. Used as
// the verification oracle for the filter and as a desk-scale population for
// cross-user experiments.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flow/dataset.hpp"

namespace flow {

// Constant angular velocity of the carrier, in the carrier's own frame.
struct RateSegment {
  double duration_s = 1.0;
  Vec3 body_rate;  // rad/s
};

// Sinusoidal linear acceleration in NED: amplitude * sin(2 pi f t + phase).
struct AccelComponent {
  Vec3 amplitude_ned;  // m/s^2
  double frequency_hz = 1.0;
  double phase_rad = 0.0;
};

struct NoiseStd {
  double accel = 0.0;  // m/s^2
  double gyro = 0.0;   // rad/s
  double mag = 0.0;    // in units of the unit reference field
};

struct SynthSpec {
  std::string name;
  int label = 0;
  // Segments are replayed cyclically when `repeat_segments` is set; otherwise
  // the carrier stops rotating after the last one.
  std::vector<RateSegment> rate_segments;
  bool repeat_segments = true;
  std::vector<AccelComponent> linear_accel;
  Quaternion initial_attitude;  // carrier -> NED at t = 0
  Quaternion mounting;          // sensor -> carrier
  NoiseStd noise;
  double duration_s = 20.0;
  double rate_hz = 30.0;
  double inclination_deg = 60.0;

  // Throws Config on invalid values; warmup_seconds sets the minimum length.
  void validate(double warmup_seconds = 1.0) const;
};

struct SynthResult {
  Recording recording;  // one sensor named "imu"
  std::vector<Quaternion> ground_truth;  // sensor -> NED per sample
};

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed, int subject_id = 1);

// Uniformly distributed random rotation (Shoemake).
Quaternion random_rotation(std::mt19937_64& rng);

struct PopulationOptions {
  double min_mounting_separation_deg = 10.0;
  // Mountings are rotations of at most this angle away from the nominal
  // (identity) placement; 180 draws uniformly from all rotations.
  double max_mounting_angle_deg = 180.0;
  // Per-user multiplicative scale jitter on motion amplitude and tempo.
  double amplitude_jitter = 0.1;
  double tempo_jitter = 0.1;
  // Each session starts facing a uniformly random heading.
  bool random_heading = true;
  // Each session re-seats the sensor: the user's mounting is composed with a
  // random rotation of up to this angle about a random axis.
  double session_mounting_jitter_deg = 0.0;
};

struct SynthPopulation {
  std::vector<Recording> recordings;  // user-major, activity-minor
  std::vector<Quaternion> mountings;  // one per user
  std::vector<std::vector<Quaternion>> ground_truth;
};

// Every user wears the sensor with its own random mounting rotation (pairwise
// separated by at least min_mounting_separation_deg) for all activities.
// Subject ids are 1..num_users.
SynthPopulation synth_population(int num_users, std::span<const SynthSpec> activities,
                                 std::uint64_t seed, const PopulationOptions& options = {});

// Four activities that differ only in the direction of motion relative to
// gravity: vertical bounce, horizontal sway, turning about the vertical and
// rocking about a horizontal axis. All of them also turn slowly about the
// body z axis at `heading_rate` rad/s, so the attitude sweeps through every
// heading in each session.
std::vector<SynthSpec> default_activity_templates(double duration_s = 20.0, double rate_hz = 30.0,
                                                  NoiseStd noise = {0.05, 0.01, 0.01},
                                                  double heading_rate = 0.3);

}  // namespace flow
