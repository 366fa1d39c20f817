#pragma once

// Per-signal instantaneous thresholds combined by majority vote, and their
// calibration on development windows.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "falldet/derived.hpp"
#include "falldet/numfmt.hpp"

namespace falldet {

enum class DerivedSignal { SmvAcc, SmvGyr, FI, AVD };

inline constexpr std::array<DerivedSignal, 4> kDerivedSignals{
    DerivedSignal::SmvAcc, DerivedSignal::SmvGyr, DerivedSignal::FI, DerivedSignal::AVD};

inline const char *to_string(DerivedSignal s) {
  switch (s) {
  case DerivedSignal::SmvAcc: return "SMV_acc";
  case DerivedSignal::SmvGyr: return "SMV_gyr";
  case DerivedSignal::FI: return "FI";
  case DerivedSignal::AVD: return "AVD";
  }
  return "?";
}

inline const char *unit_of(DerivedSignal s) { return s == DerivedSignal::SmvGyr ? "deg/s" : "g"; }

inline std::optional<DerivedSignal> parse_derived_signal(std::string_view text) {
  for (auto s : kDerivedSignals)
    if (text == to_string(s)) return s;
  if (text == "SMV" || text == "smv") return DerivedSignal::SmvAcc;
  if (text == "fi") return DerivedSignal::FI;
  if (text == "avd") return DerivedSignal::AVD;
  return std::nullopt;
}

inline const std::vector<double> &signal_of(const DerivedSignalSet &d, DerivedSignal s) {
  switch (s) {
  case DerivedSignal::SmvAcc: return d.smv_acc;
  case DerivedSignal::SmvGyr: return d.smv_gyr;
  case DerivedSignal::FI: return d.fi;
  case DerivedSignal::AVD: return d.avd;
  }
  return d.smv_acc;
}

inline double peak(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

struct ThresholdEntry {
  DerivedSignal signal = DerivedSignal::SmvAcc;
  double threshold = 2.5;

  friend bool operator==(const ThresholdEntry &, const ThresholdEntry &) = default;
};

/// Only strict "Above" comparisons and Fall-on-tie voting are supported.
struct ThresholdConfig {
  std::vector<ThresholdEntry> entries;

  friend bool operator==(const ThresholdConfig &, const ThresholdConfig &) = default;

  void validate() const {
    if (entries.empty()) throw Error(ErrorCode::NoSignalsEnabled, "threshold config is empty");
    for (const auto &e : entries)
      if (!std::isfinite(e.threshold) || e.threshold <= 0.0)
        throw Error(ErrorCode::InvalidConfig,
                    std::string("threshold for ") + to_string(e.signal) + " must be finite and > 0");
  }

  std::string describe() const {
    std::string out = "threshold(";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i) out += "+";
      out += to_string(entries[i].signal);
    }
    return out + ")";
  }
};

struct Vote {
  DerivedSignal signal;
  double peak;
  Label vote;
};

struct ThresholdVerdict {
  Label label = Label::ADL;
  std::vector<Vote> votes;

  /// Fraction of voters that said Fall.
  double score() const {
    if (votes.empty()) return 0.0;
    double falls = 0;
    for (const auto &v : votes) falls += v.vote == Label::Fall ? 1.0 : 0.0;
    return falls / static_cast<double>(votes.size());
  }
};

inline ThresholdVerdict detect(const DerivedSignalSet &derived, const ThresholdConfig &config) {
  config.validate();
  ThresholdVerdict verdict;
  std::size_t falls = 0;
  for (const auto &e : config.entries) {
    double p = peak(signal_of(derived, e.signal));
    Label v = p > e.threshold ? Label::Fall : Label::ADL;
    falls += v == Label::Fall ? 1 : 0;
    verdict.votes.push_back({e.signal, p, v});
  }
  const std::size_t adls = config.entries.size() - falls;
  verdict.label = falls >= adls ? Label::Fall : Label::ADL;
  return verdict;
}

inline ThresholdVerdict detect(const SignalWindow &, const DerivedSignalSet &derived,
                               const ThresholdConfig &config) {
  return detect(derived, config);
}

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  std::size_t count() const {
    return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  }
  double at(std::size_t i) const { return lo + static_cast<double>(i) * step; }
};

inline GridRange default_grid(DerivedSignal s) {
  switch (s) {
  case DerivedSignal::SmvAcc: return {1.5, 6.0, 0.05};
  case DerivedSignal::FI: return {0.5, 10.0, 0.05};
  case DerivedSignal::AVD: return {1.2, 4.0, 0.05};
  case DerivedSignal::SmvGyr: return {100.0, 1000.0, 5.0};
  }
  return {};
}

struct CalibrationPoint {
  double threshold;
  double sensitivity;
  double specificity;
};

/// Peaks of one signal per window, split by class.
struct PeakTable {
  std::vector<double> fall_peaks;
  std::vector<double> adl_peaks;
};

/// Maximise specificity subject to 100% sensitivity; otherwise maximise
/// sensitivity, then specificity, then prefer the larger threshold.
inline CalibrationPoint calibrate_signal(const PeakTable &peaks, const GridRange &grid) {
  if (peaks.fall_peaks.empty() || peaks.adl_peaks.empty())
    throw Error(ErrorCode::SingleClassDevSet, "development set needs both Fall and ADL windows");
  if (!(grid.step > 0.0) || grid.hi < grid.lo)
    throw Error(ErrorCode::InvalidConfig, "bad calibration grid");

  std::vector<double> falls = peaks.fall_peaks, adls = peaks.adl_peaks;
  std::sort(falls.begin(), falls.end());
  std::sort(adls.begin(), adls.end());
  auto count_above = [](const std::vector<double> &sorted, double thr) {
    return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), thr));
  };

  std::optional<CalibrationPoint> best;
  for (std::size_t i = 0, n = grid.count(); i < n; ++i) {
    double thr = grid.at(i);
    CalibrationPoint p{thr, count_above(falls, thr) / static_cast<double>(falls.size()),
                       1.0 - count_above(adls, thr) / static_cast<double>(adls.size())};
    if (!best || p.sensitivity > best->sensitivity ||
        (p.sensitivity == best->sensitivity &&
         (p.specificity > best->specificity ||
          (p.specificity == best->specificity && p.threshold > best->threshold))))
      best = p;
  }
  return *best;
}

struct CalibrationInput {
  Label label;
  const DerivedSignalSet *derived;
};

inline ThresholdConfig calibrate(std::span<const CalibrationInput> dev,
                                 std::span<const DerivedSignal> signals,
                                 const std::map<DerivedSignal, GridRange> &grids = {}) {
  if (signals.empty()) throw Error(ErrorCode::NoSignalsEnabled, "no signals to calibrate");
  ThresholdConfig config;
  for (DerivedSignal s : signals) {
    PeakTable table;
    for (const auto &item : dev) {
      double p = peak(signal_of(*item.derived, s));
      (item.label == Label::Fall ? table.fall_peaks : table.adl_peaks).push_back(p);
    }
    auto it = grids.find(s);
    GridRange grid = it != grids.end() ? it->second : default_grid(s);
    config.entries.push_back({s, calibrate_signal(table, grid).threshold});
  }
  return config;
}

// Text format, one signal per line:
//   # falldet threshold config v1
//   tie_policy = FallOnTie
//   SMV_acc = 2.35 g
inline void write_threshold_config(std::ostream &os, const ThresholdConfig &config) {
  os << "# falldet threshold config v1\n";
  os << "tie_policy = FallOnTie\n";
  os << "direction = Above\n";
  for (const auto &e : config.entries)
    os << to_string(e.signal) << " = " << format_double(e.threshold) << ' ' << unit_of(e.signal)
       << '\n';
}

inline ThresholdConfig read_threshold_config(std::istream &is) {
  ThresholdConfig config;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string &why) {
    throw Error(ErrorCode::ParseError, "threshold config line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    auto eq = text.find('=');
    if (eq == std::string_view::npos) fail("expected 'key = value'");
    auto key = trim(text.substr(0, eq));
    auto value = trim(text.substr(eq + 1));
    if (key == "tie_policy") {
      if (value != "FallOnTie") fail("unsupported tie policy");
      continue;
    }
    if (key == "direction") {
      if (value != "Above") fail("unsupported direction");
      continue;
    }
    auto signal = parse_derived_signal(key);
    if (!signal) fail("unknown key '" + std::string(key) + "'");
    auto space = value.find(' ');
    auto number = parse_double(value.substr(0, space));
    if (!number) fail("bad threshold value");
    if (space != std::string_view::npos) {
      auto unit = trim(value.substr(space + 1));
      if (unit != unit_of(*signal)) fail("unit '" + std::string(unit) + "' does not match signal");
    }
    for (const auto &e : config.entries)
      if (e.signal == *signal) fail("duplicate signal");
    config.entries.push_back({*signal, *number});
  }
  config.validate();
  return config;
}

} // namespace falldet
