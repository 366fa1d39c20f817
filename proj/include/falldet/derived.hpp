#pragma once

// Threshold-approach time signals: SMV, Fall Index and Absolute Vertical Direction.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "falldet/signal.hpp"

namespace falldet {

enum class Sensor { Acc, Gyr };

inline constexpr std::size_t kDefaultFiHistory = 20;
inline constexpr double kDefaultGravitySmoothingSeconds = 1.0;
/// Below this moving-average magnitude (g) the gravity direction is held.
inline constexpr double kGravityHoldMagnitude = 0.05;

struct DerivedSignalSet {
  std::vector<double> smv_acc;
  std::vector<double> smv_gyr;
  std::vector<double> fi;
  std::vector<double> avd;
};

inline double norm3(const Vec3 &v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline std::vector<double> smv(std::span<const SensorSample> samples, Sensor sensor) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto &s : samples) out.push_back(norm3(sensor == Sensor::Acc ? s.acc : s.gyr));
  return out;
}

inline std::vector<double> smv(const SignalWindow &window, Sensor sensor) {
  return smv(std::span<const SensorSample>(window.samples), sensor);
}

/// fi[t] = sqrt of the summed squared first differences of the three
/// accelerometer axes over the trailing `history` differences; fi[0] = 0.
inline std::vector<double> fall_index(std::span<const SensorSample> samples,
                                      std::size_t history = kDefaultFiHistory) {
  if (history < 1) throw Error(ErrorCode::InvalidConfig, "fall index history must be >= 1");
  const std::size_t n = samples.size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = samples[i].acc[a] - samples[i - 1].acc[a];
      acc += d * d;
    }
    sq[i] = acc;
  }
  // Running sum recomputed from scratch every `history` steps to keep
  // cancellation error from accumulating over long windows.
  std::vector<double> out(n, 0.0);
  double running = 0.0;
  for (std::size_t t = 1; t < n; ++t) {
    std::size_t first = t >= history ? t - history + 1 : 1;
    if (t % history == 0) {
      running = 0.0;
      for (std::size_t i = first; i <= t; ++i) running += sq[i];
    } else {
      running += sq[t];
      if (first > 1) running -= sq[first - 1];
    }
    out[t] = std::sqrt(std::max(running, 0.0));
  }
  return out;
}

inline std::vector<double> fall_index(const SignalWindow &window,
                                      std::size_t history = kDefaultFiHistory) {
  return fall_index(std::span<const SensorSample>(window.samples), history);
}

inline std::size_t gravity_window_samples(double smoothing_seconds, double sample_rate_hz) {
  auto n = static_cast<long>(std::lround(smoothing_seconds * sample_rate_hz));
  return static_cast<std::size_t>(std::max(1L, n));
}

/// |acc[t] . g_hat[t]| where g_hat is the unit trailing mean of acc.
inline std::vector<double> avd(std::span<const SensorSample> samples, double sample_rate_hz,
                               double gravity_smoothing_seconds = kDefaultGravitySmoothingSeconds) {
  if (!(gravity_smoothing_seconds > 0.0))
    throw Error(ErrorCode::InvalidConfig, "gravity smoothing must be positive");
  const std::size_t span_len = gravity_window_samples(gravity_smoothing_seconds, sample_rate_hz);
  const std::size_t n = samples.size();
  std::vector<double> out(n, 0.0);
  Vec3 g_hat{0.0, 0.0, 1.0};
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t first = t + 1 >= span_len ? t + 1 - span_len : 0;
    Vec3 mean{0.0, 0.0, 0.0};
    for (std::size_t i = first; i <= t; ++i)
      for (int a = 0; a < 3; ++a) mean[a] += samples[i].acc[a];
    double count = static_cast<double>(t - first + 1);
    for (double &m : mean) m /= count;
    double mag = norm3(mean);
    if (mag >= kGravityHoldMagnitude)
      for (int a = 0; a < 3; ++a) g_hat[a] = mean[a] / mag;
    const auto &acc = samples[t].acc;
    out[t] = std::abs(acc[0] * g_hat[0] + acc[1] * g_hat[1] + acc[2] * g_hat[2]);
  }
  return out;
}

inline std::vector<double> avd(const SignalWindow &window,
                               double gravity_smoothing_seconds = kDefaultGravitySmoothingSeconds) {
  return avd(std::span<const SensorSample>(window.samples), window.sample_rate_hz,
             gravity_smoothing_seconds);
}

struct DerivedParams {
  std::size_t fi_history = kDefaultFiHistory;
  double gravity_smoothing_seconds = kDefaultGravitySmoothingSeconds;
};

inline DerivedSignalSet derive_all(std::span<const SensorSample> samples, double sample_rate_hz,
                                   const DerivedParams &params = {}) {
  DerivedSignalSet d;
  d.smv_acc = smv(samples, Sensor::Acc);
  d.smv_gyr = smv(samples, Sensor::Gyr);
  d.fi = fall_index(samples, params.fi_history);
  d.avd = avd(samples, sample_rate_hz, params.gravity_smoothing_seconds);
  return d;
}

inline DerivedSignalSet derive_all(const SignalWindow &window, const DerivedParams &params = {}) {
  return derive_all(std::span<const SensorSample>(window.samples), window.sample_rate_hz, params);
}

} // namespace falldet
