#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "flow/attitude.hpp"
#include "flow/dataset.hpp"
#include "flow/model.hpp"

namespace flow::testing {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double deg) { return deg * kPi / 180.0; }

// Body-frame readings of a sensor at rest whose attitude is q (unit reference
// field with the given inclination).
inline LocalSample static_reading(const Quaternion& q, double inclination_deg = 60.0) {
  const Quaternion inv = q.conjugate();
  const double inc = rad(inclination_deg);
  LocalSample s;
  s.a = inv.rotate({0.0, 0.0, -kStandardGravity});
  s.m = inv.rotate({std::cos(inc), 0.0, std::sin(inc)});
  return s;
}

inline std::vector<LocalSample> static_stream(const Quaternion& q, int samples, double rate_hz,
                                              double inclination_deg = 60.0) {
  std::vector<LocalSample> out(samples, static_reading(q, inclination_deg));
  for (int i = 0; i < samples; ++i) out[i].timestamp = i / rate_hz;
  return out;
}

inline void add_noise(std::vector<LocalSample>& series, double accel_std, double gyro_std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> na(0.0, accel_std), ng(0.0, gyro_std);
  for (auto& s : series) {
    s.a += Vec3{na(rng), na(rng), na(rng)};
    s.g += Vec3{ng(rng), ng(rng), ng(rng)};
  }
}

// Symmetric relative error. Below a combined magnitude of 1e-7 the
// denominator is held at 1e-7: central differences of an O(1) loss carry
// about 1e-12 of round-off at h = 1e-4, which would otherwise dominate the
// ratio for gradients near zero.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-7);
}

// Central differences of `loss` with respect to every entry of `value`,
// compared against `analytic`. Returns the worst relative error.
inline double gradient_check(nn::Mat<double>& value, const nn::Mat<double>& analytic,
                             const std::function<double()>& loss, double h = 1e-4) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    const double orig = value.data()[i];
    value.data()[i] = orig + h;
    const double up = loss();
    value.data()[i] = orig - h;
    const double down = loss();
    value.data()[i] = orig;
    worst = std::max(worst, rel_error((up - down) / (2.0 * h), analytic.data()[i]));
  }
  return worst;
}

inline nn::Mat<double> random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  nn::Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline Window make_window(int steps, int channels, int label, int subject, std::mt19937_64& rng) {
  Window w;
  w.steps = steps;
  w.channels = channels;
  w.label = label;
  w.subject_id = subject;
  w.values.resize(static_cast<std::size_t>(steps) * channels);
  std::normal_distribution<double> nd;
  for (auto& v : w.values) v = nd(rng);
  return w;
}

// Two-class set where the class shifts every channel of the window by +-1.
inline std::vector<Window> toy_separable(int per_class, int steps, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Window> out;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int label = i % 2;
    Window w = make_window(steps, channels, label, 1, rng);
    for (auto& v : w.values) v = 0.3 * v + (label == 0 ? -1.0 : 1.0);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace flow::testing
