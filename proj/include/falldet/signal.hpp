#pragma once

// Raw IMU domain types and the windowing policy.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "falldet/error.hpp"

namespace falldet {

using Vec3 = std::array<double, 3>;

enum class Label { ADL, Fall };

inline const char *to_string(Label label) { return label == Label::Fall ? "Fall" : "ADL"; }

inline Label parse_label(std::string_view text) {
  if (text == "Fall" || text == "fall" || text == "FALL") return Label::Fall;
  if (text == "ADL" || text == "adl") return Label::ADL;
  throw Error(ErrorCode::ParseError, "unknown label '" + std::string(text) + "'");
}

enum class Source { Erciyes, UMAFall, Canonical, Synthetic };

inline const char *to_string(Source source) {
  switch (source) {
  case Source::Erciyes: return "Erciyes";
  case Source::UMAFall: return "UMAFall";
  case Source::Canonical: return "Canonical";
  case Source::Synthetic: return "Synthetic";
  }
  return "Canonical";
}

inline Source parse_source(std::string_view text) {
  if (text == "Erciyes") return Source::Erciyes;
  if (text == "UMAFall") return Source::UMAFall;
  if (text == "Canonical") return Source::Canonical;
  if (text == "Synthetic") return Source::Synthetic;
  throw Error(ErrorCode::ParseError, "unknown source '" + std::string(text) + "'");
}

/// One 6-axis reading. Accelerometer in g, gyroscope in deg/s.
struct SensorSample {
  double t = 0.0;
  Vec3 acc{};
  Vec3 gyr{};

  friend bool operator==(const SensorSample &, const SensorSample &) = default;
};

enum class Channel { AccX, AccY, AccZ, GyrX, GyrY, GyrZ };

inline constexpr std::array<Channel, 6> kAllChannels{Channel::AccX, Channel::AccY, Channel::AccZ,
                                                     Channel::GyrX, Channel::GyrY, Channel::GyrZ};

inline double channel_value(const SensorSample &s, Channel c) {
  switch (c) {
  case Channel::AccX: return s.acc[0];
  case Channel::AccY: return s.acc[1];
  case Channel::AccZ: return s.acc[2];
  case Channel::GyrX: return s.gyr[0];
  case Channel::GyrY: return s.gyr[1];
  case Channel::GyrZ: return s.gyr[2];
  }
  return 0.0;
}

inline constexpr double kMinSampleRateHz = 15.0;
inline constexpr double kMaxSampleRateHz = 30.0;
inline constexpr double kRateTolerance = 0.20;

struct TrialRecording {
  std::string subject_id;
  std::string activity_code;
  Label label = Label::ADL;
  double sample_rate_hz = 25.0;
  std::vector<SensorSample> samples;
  Source source = Source::Canonical;
  /// Stable identifier, usually the path relative to the corpus root.
  std::string id;

  friend bool operator==(const TrialRecording &, const TrialRecording &) = default;
};

inline double median_gap(const std::vector<SensorSample> &samples) {
  if (samples.size() < 2) return 0.0;
  std::vector<double> gaps;
  gaps.reserve(samples.size() - 1);
  for (std::size_t i = 1; i < samples.size(); ++i) gaps.push_back(samples[i].t - samples[i - 1].t);
  auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
  std::nth_element(gaps.begin(), mid, gaps.end());
  if (gaps.size() % 2 == 1) return *mid;
  double upper = *mid;
  double lower = *std::max_element(gaps.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Empty string when the recording satisfies every invariant; otherwise the first violation.
inline std::string check_recording(const TrialRecording &r) {
  if (r.samples.empty()) return "no samples";
  if (!std::isfinite(r.sample_rate_hz) || r.sample_rate_hz < kMinSampleRateHz ||
      r.sample_rate_hz > kMaxSampleRateHz)
    return "sample rate outside [15, 30] Hz";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    const auto &s = r.samples[i];
    if (!std::isfinite(s.t) || s.t < 0.0) return "bad timestamp at sample " + std::to_string(i);
    for (Channel c : kAllChannels)
      if (!std::isfinite(channel_value(s, c)))
        return "non-finite channel value at sample " + std::to_string(i);
    if (i > 0 && !(s.t > r.samples[i - 1].t))
      return "timestamps not strictly increasing at sample " + std::to_string(i);
  }
  if (r.samples.size() >= 2) {
    double expected = 1.0 / r.sample_rate_hz;
    double gap = median_gap(r.samples);
    if (std::abs(gap - expected) > kRateTolerance * expected)
      return "median sample gap inconsistent with declared rate";
  }
  return {};
}

inline void validate(const TrialRecording &r) {
  if (r.samples.empty()) throw Error(ErrorCode::EmptyRecording, "recording '" + r.id + "'");
  if (auto why = check_recording(r); !why.empty())
    throw Error(ErrorCode::InvalidRecording, "recording '" + r.id + "': " + why);
}

/// A fixed-duration slice of a recording.
struct SignalWindow {
  std::string recording_ref;
  std::string subject_id;
  std::size_t index = 0;
  double start_t = 0.0;
  /// Nominal end: last sample time plus one sample period.
  double end_t = 0.0;
  double sample_rate_hz = 25.0;
  Label label = Label::ADL;
  std::vector<SensorSample> samples;

  std::size_t size() const { return samples.size(); }

  std::vector<double> channel(Channel c) const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto &s : samples) out.push_back(channel_value(s, c));
    return out;
  }

  std::string ref() const { return recording_ref + "#" + std::to_string(index); }
};

inline constexpr double kDefaultWindowSeconds = 60.0;
inline constexpr std::size_t kDefaultMinWindowSamples = 2;

/// Non-overlapping windows anchored at the first sample. A trailing remainder
/// with fewer than `min_samples` samples is merged into the preceding window.
inline std::vector<SignalWindow> segment(const TrialRecording &recording,
                                         double window_seconds = kDefaultWindowSeconds,
                                         std::size_t min_samples = kDefaultMinWindowSamples) {
  if (recording.samples.empty())
    throw Error(ErrorCode::EmptyRecording, "recording '" + recording.id + "'");
  if (!(window_seconds > 0.0))
    throw Error(ErrorCode::InvalidConfig, "window_seconds must be positive");

  const auto &samples = recording.samples;
  const double origin = samples.front().t;

  // Bucket boundaries as [first, last) sample index ranges.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t begin = 0;
  long bucket = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    long b = static_cast<long>(std::floor((samples[i].t - origin) / window_seconds));
    if (b != bucket) {
      if (i > begin) ranges.emplace_back(begin, i);
      begin = i;
      bucket = b;
    }
  }
  ranges.emplace_back(begin, samples.size());

  if (ranges.size() > 1 && ranges.back().second - ranges.back().first < min_samples) {
    auto tail = ranges.back();
    ranges.pop_back();
    ranges.back().second = tail.second;
  }

  std::vector<SignalWindow> windows;
  windows.reserve(ranges.size());
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    auto [first, last] = ranges[w];
    SignalWindow win;
    win.recording_ref = recording.id;
    win.subject_id = recording.subject_id;
    win.index = w;
    win.sample_rate_hz = recording.sample_rate_hz;
    win.label = recording.label;
    win.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(first),
                       samples.begin() + static_cast<std::ptrdiff_t>(last));
    win.start_t = win.samples.front().t;
    win.end_t = win.samples.back().t + 1.0 / recording.sample_rate_hz;
    windows.push_back(std::move(win));
  }
  return windows;
}

} // namespace falldet
