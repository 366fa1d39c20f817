#pragma once

// Online detection over consecutive, non-overlapping windows of a sample stream.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "falldet/derived.hpp"
#include "falldet/features.hpp"
#include "falldet/ml/model.hpp"
#include "falldet/signal.hpp"
#include "falldet/threshold.hpp"

namespace falldet {

struct StreamEvent {
  /// Timestamp of the last sample in the completed window.
  double t_end = 0.0;
  Label label = Label::ADL;
  double score = 0.0;
};

struct StreamOptions {
  double window_seconds = kDefaultWindowSeconds;
  std::size_t min_window_samples = kDefaultMinWindowSamples;
  /// Nominal sample rate; 0 estimates it from each window's median gap.
  double sample_rate_hz = 25.0;
  DerivedParams derived;
};

using StreamDetector = std::variant<ThresholdConfig, ml::ClassifierModel>;

class StreamingDetector {
public:
  StreamingDetector(StreamDetector detector, StreamOptions options = {})
      : detector_(std::move(detector)), options_(options) {
    if (auto *t = std::get_if<ThresholdConfig>(&detector_)) t->validate();
    if (auto *m = std::get_if<ml::ClassifierModel>(&detector_); m && !m->fitted())
      throw Error(ErrorCode::ModelNotFitted, m->describe());
  }

  /// Samples must arrive in strictly increasing time; others are rejected
  /// with a reason and do not disturb the stream.
  std::optional<std::string> reject_reason(const SensorSample &s) const {
    if (!std::isfinite(s.t) || s.t < 0.0) return "bad timestamp";
    for (Channel c : kAllChannels)
      if (!std::isfinite(channel_value(s, c))) return "non-finite value";
    if (last_t_ && !(s.t > *last_t_)) return "timestamp not increasing";
    return std::nullopt;
  }

  /// Feeds one sample; returns an event when it closes the current window.
  std::optional<StreamEvent> push(const SensorSample &s) {
    if (reject_reason(s)) return std::nullopt;
    last_t_ = s.t;
    std::optional<StreamEvent> event;
    if (!buffer_.empty() && s.t - buffer_.front().t >= options_.window_seconds) {
      if (buffer_.size() >= options_.min_window_samples) event = evaluate();
      buffer_.clear();
    }
    buffer_.push_back(s);
    return event;
  }

  /// Flushes a trailing partial window.
  std::optional<StreamEvent> finish() {
    std::optional<StreamEvent> event;
    if (buffer_.size() >= options_.min_window_samples) event = evaluate();
    buffer_.clear();
    return event;
  }

private:
  StreamEvent evaluate() const {
    SignalWindow w;
    w.recording_ref = "stream";
    w.samples = buffer_;
    w.start_t = buffer_.front().t;
    double rate = options_.sample_rate_hz;
    if (rate <= 0.0) {
      double gap = median_gap(buffer_);
      rate = gap > 0.0 ? 1.0 / gap : 25.0;
    }
    w.sample_rate_hz = rate;
    w.end_t = buffer_.back().t + 1.0 / rate;
    auto derived = derive_all(w, options_.derived);

    StreamEvent e;
    e.t_end = buffer_.back().t;
    if (const auto *t = std::get_if<ThresholdConfig>(&detector_)) {
      auto v = detect(derived, *t);
      e.label = v.label;
      e.score = v.score();
    } else {
      auto p = ml::predict(std::get<ml::ClassifierModel>(detector_), extract(w, derived));
      e.label = p.label;
      e.score = p.score;
    }
    return e;
  }

  StreamDetector detector_;
  StreamOptions options_;
  std::vector<SensorSample> buffer_;
  std::optional<double> last_t_;
};

} // namespace falldet
