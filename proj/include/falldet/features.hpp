#pragma once

// Eleven global statistics per signal and the 88-entry feature vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "falldet/derived.hpp"
#include "falldet/numfmt.hpp"
#include "falldet/signal.hpp"

namespace falldet {

inline constexpr std::size_t kStatsPerSignal = 11;
inline constexpr std::size_t kSignalsPerSensor = 4;
inline constexpr std::size_t kFeaturesPerSensor = kStatsPerSignal * kSignalsPerSensor; // 44
inline constexpr std::size_t kFeatureCount = 2 * kFeaturesPerSensor;                   // 88
/// Total spectral power below which the spectrum is treated as empty.
inline constexpr double kMinSpectralPower = 1e-12;

inline constexpr std::array<const char *, kStatsPerSignal> kStatNames{
    "mean", "variance", "median", "delta", "std", "max", "min", "p25", "p75", "psd", "pse"};

inline constexpr std::array<const char *, 2 * kSignalsPerSensor> kSignalNames{
    "acc_x", "acc_y", "acc_z", "smv_acc", "gyr_x", "gyr_y", "gyr_z", "smv_gyr"};

struct Stats11 {
  double mean = 0, variance = 0, median = 0, delta = 0, std = 0, max = 0, min = 0, p25 = 0,
         p75 = 0, psd = 0, pse = 0;

  std::array<double, kStatsPerSignal> as_array() const {
    return {mean, variance, median, delta, std, max, min, p25, p75, psd, pse};
  }
};

/// Linear interpolation between closest ranks on an ascending sequence.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// One-sided periodogram of the mean-removed signal, bins 1..floor(N/2),
/// normalised so the bins sum to the population variance.
inline std::vector<double> periodogram(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n < 2) return {};
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);

  std::unique_ptr<double, decltype(&fftw_free)> in(
      static_cast<double *>(fftw_malloc(sizeof(double) * n)), &fftw_free);
  const std::size_t n_out = n / 2 + 1;
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(
      static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * n_out)), &fftw_free);
  for (std::size_t i = 0; i < n; ++i) in.get()[i] = signal[i] - mean;

  fftw_plan plan =
      fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  std::vector<double> bins;
  bins.reserve(n / 2);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double re = out.get()[k][0];
    const double im = out.get()[k][1];
    const bool nyquist = (n % 2 == 0) && (k == n / 2);
    bins.push_back((nyquist ? 1.0 : 2.0) * (re * re + im * im) * scale);
  }
  return bins;
}

inline double spectral_entropy(std::span<const double> bins) {
  double total = 0.0;
  for (double p : bins) total += p;
  if (bins.size() < 2 || total < kMinSpectralPower) return 0.0;
  double h = 0.0;
  for (double p : bins) {
    double q = p / total;
    if (q > 0.0) h -= q * std::log2(q);
  }
  double pse = h / std::log2(static_cast<double>(bins.size()));
  return std::clamp(pse, 0.0, 1.0);
}

/// `sample_rate_hz` is accepted for interface symmetry; both spectral
/// features are rate independent by construction.
inline Stats11 stats11(std::span<const double> signal, double sample_rate_hz = 25.0) {
  (void)sample_rate_hz;
  const std::size_t n = signal.size();
  if (n < 2)
    throw Error(ErrorCode::SignalTooShort, "need at least 2 samples, got " + std::to_string(n));
  for (double v : signal)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidRecording, "non-finite signal value");

  Stats11 s;
  double sum = 0.0;
  for (double v : signal) sum += v;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : signal) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / static_cast<double>(n);
  s.std = std::sqrt(s.variance);

  std::vector<double> sorted(signal.begin(), signal.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.delta = s.max - s.min;
  s.median = percentile_sorted(sorted, 0.5);
  s.p25 = percentile_sorted(sorted, 0.25);
  s.p75 = percentile_sorted(sorted, 0.75);

  auto bins = periodogram(signal);
  double power = 0.0;
  for (double p : bins) power += p;
  s.psd = power;
  s.pse = spectral_entropy(bins);
  return s;
}

inline const std::vector<std::string> &feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kFeatureCount);
    for (const char *signal : kSignalNames)
      for (const char *stat : kStatNames) out.push_back(std::string(signal) + "_" + stat);
    return out;
  }();
  return names;
}

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::string window_ref;
  std::string subject_id;
  Label label = Label::ADL;
};

inline FeatureVector extract(const SignalWindow &window, const DerivedSignalSet &derived) {
  FeatureVector fv;
  fv.window_ref = window.ref();
  fv.subject_id = window.subject_id;
  fv.label = window.label;

  const std::array<std::vector<double>, 8> signals{
      window.channel(Channel::AccX), window.channel(Channel::AccY), window.channel(Channel::AccZ),
      derived.smv_acc,
      window.channel(Channel::GyrX), window.channel(Channel::GyrY), window.channel(Channel::GyrZ),
      derived.smv_gyr};

  for (std::size_t s = 0; s < signals.size(); ++s) {
    auto stats = stats11(signals[s], window.sample_rate_hz).as_array();
    std::copy(stats.begin(), stats.end(),
              fv.values.begin() + static_cast<std::ptrdiff_t>(s * kStatsPerSignal));
  }
  return fv;
}

inline FeatureVector extract(const SignalWindow &window) {
  return extract(window, derive_all(window));
}

/// Header: 88 feature names, then label, subject_id, window_ref.
inline void write_feature_csv(std::ostream &os, std::span<const FeatureVector> rows) {
  for (const auto &name : feature_names()) os << name << ',';
  os << "label,subject_id,window_ref\n";
  for (const auto &fv : rows) {
    for (double v : fv.values) os << format_double(v) << ',';
    os << to_string(fv.label) << ',' << fv.subject_id << ',' << fv.window_ref << '\n';
  }
}

} // namespace falldet
