#pragma once

// Subject-disjoint evaluation: splitting, window preparation with an access
// audit, detector runs, confusion metrics and report rendering.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "falldet/derived.hpp"
#include "falldet/features.hpp"
#include "falldet/ml/model.hpp"
#include "falldet/numfmt.hpp"
#include "falldet/signal.hpp"
#include "falldet/threshold.hpp"

namespace falldet {

// ---------------------------------------------------------------------------
// Subject split

inline constexpr double kEvalFraction = 0.2;

struct SubjectSplit {
  std::vector<std::string> dev_subjects;
  std::vector<std::string> eval_subjects;
  std::uint64_t seed = 0;

  bool is_eval(const std::string &subject) const {
    return std::binary_search(eval_subjects.begin(), eval_subjects.end(), subject);
  }
};

inline std::size_t eval_subject_count(std::size_t n_subjects) {
  auto n = static_cast<std::size_t>(std::lround(kEvalFraction * static_cast<double>(n_subjects)));
  return std::max<std::size_t>(1, n);
}

/// Sorted, shuffled with a seeded permutation, last max(1, round(0.2 n)) to eval.
/// Both returned lists are sorted.
inline SubjectSplit split(std::vector<std::string> subjects, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2)
    throw Error(ErrorCode::TooFewSubjects, "need at least 2 subjects, got " + std::to_string(subjects.size()));
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const std::size_t n_eval = eval_subject_count(subjects.size());
  SubjectSplit s;
  s.seed = seed;
  s.dev_subjects.assign(subjects.begin(), subjects.end() - static_cast<std::ptrdiff_t>(n_eval));
  s.eval_subjects.assign(subjects.end() - static_cast<std::ptrdiff_t>(n_eval), subjects.end());
  std::sort(s.dev_subjects.begin(), s.dev_subjects.end());
  std::sort(s.eval_subjects.begin(), s.eval_subjects.end());
  return s;
}

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

  std::size_t positives() const { return tp + fn; }
  std::size_t negatives() const { return tn + fp; }
  std::size_t total() const { return tp + fn + tn + fp; }

  friend bool operator==(const Confusion &, const Confusion &) = default;
};

/// Percentages; absent when the denominator is zero.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

inline Metrics metrics_of(const Confusion &c) {
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(c.tp + c.tn, c.total()), ratio(c.tp, c.positives()), ratio(c.tn, c.negatives())};
}

struct EvalReport {
  std::string detector;
  std::string dataset;
  Confusion confusion;
  Metrics metrics;
};

struct Outcome {
  Label predicted;
  Label actual;
};

/// Fall is the positive class.
inline EvalReport compute_metrics(std::span<const Outcome> outcomes) {
  EvalReport r;
  for (const auto &o : outcomes) {
    if (o.actual == Label::Fall) (o.predicted == Label::Fall ? r.confusion.tp : r.confusion.fn) += 1;
    else (o.predicted == Label::ADL ? r.confusion.tn : r.confusion.fp) += 1;
  }
  r.metrics = metrics_of(r.confusion);
  return r;
}

// ---------------------------------------------------------------------------
// Access audit

enum class Stage { Calibrate, Standardize, Train, Predict };

inline const char *to_string(Stage s) {
  switch (s) {
  case Stage::Calibrate: return "calibrate";
  case Stage::Standardize: return "standardize";
  case Stage::Train: return "train";
  case Stage::Predict: return "predict";
  }
  return "?";
}

/// Records which subject's windows were read by which pipeline stage.
class AccessAudit {
public:
  void record(const std::string &subject, Stage stage) { accesses_.emplace(subject, stage); }

  bool touched(const std::string &subject, Stage stage) const {
    return accesses_.count({subject, stage}) != 0;
  }

  const std::set<std::pair<std::string, Stage>> &accesses() const { return accesses_; }

  /// FNV-1a over the sorted access set.
  std::uint64_t digest() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](unsigned char c) {
      h ^= c;
      h *= 1099511628211ULL;
    };
    for (const auto &[subject, stage] : accesses_) {
      for (char c : subject) mix(static_cast<unsigned char>(c));
      mix(0);
      mix(static_cast<unsigned char>(stage));
    }
    return h;
  }

  /// Subjects from `eval` seen by a fitting stage (empty means no leakage).
  std::vector<std::string> leaks(const SubjectSplit &split) const {
    std::vector<std::string> out;
    for (const auto &[subject, stage] : accesses_)
      if (stage != Stage::Predict && split.is_eval(subject)) out.push_back(subject);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

private:
  std::set<std::pair<std::string, Stage>> accesses_;
};

// ---------------------------------------------------------------------------
// Prepared corpus: windows, derived signals and features built lazily per
// subject, with every read routed through the audit.

struct PreparedWindow {
  SignalWindow window;
  DerivedSignalSet derived;
  FeatureVector features;
};

struct PrepareOptions {
  double window_seconds = kDefaultWindowSeconds;
  std::size_t min_window_samples = kDefaultMinWindowSamples;
  DerivedParams derived;
};

class PreparedCorpus {
public:
  PreparedCorpus(std::span<const TrialRecording> trials, std::string dataset, PrepareOptions options = {})
      : trials_(trials), dataset_(std::move(dataset)), options_(options) {
    for (std::size_t i = 0; i < trials_.size(); ++i) by_subject_[trials_[i].subject_id].push_back(i);
  }

  const std::string &dataset() const { return dataset_; }
  const PrepareOptions &options() const { return options_; }

  std::vector<std::string> subjects() const {
    std::vector<std::string> out;
    for (const auto &[s, _] : by_subject_) out.push_back(s);
    return out;
  }

  const std::vector<PreparedWindow> &windows(const std::string &subject, Stage stage,
                                             AccessAudit *audit) {
    if (audit) audit->record(subject, stage);
    auto cached = cache_.find(subject);
    if (cached != cache_.end()) return cached->second;
    std::vector<PreparedWindow> out;
    auto it = by_subject_.find(subject);
    if (it != by_subject_.end())
      for (std::size_t idx : it->second)
        for (auto &w : segment(trials_[idx], options_.window_seconds, options_.min_window_samples)) {
          PreparedWindow pw;
          pw.derived = derive_all(w, options_.derived);
          pw.features = extract(w, pw.derived);
          pw.window = std::move(w);
          out.push_back(std::move(pw));
        }
    return cache_.emplace(subject, std::move(out)).first->second;
  }

private:
  std::span<const TrialRecording> trials_;
  std::string dataset_;
  PrepareOptions options_;
  std::map<std::string, std::vector<std::size_t>> by_subject_;
  std::map<std::string, std::vector<PreparedWindow>> cache_;
};

// ---------------------------------------------------------------------------
// Detector configurations

struct ThresholdDetectorSpec {
  std::vector<DerivedSignal> signals{DerivedSignal::SmvAcc};
  std::map<DerivedSignal, GridRange> grids;
  /// When set, used as-is instead of calibrating on the development split.
  std::optional<ThresholdConfig> fixed;
};

struct MlDetectorSpec {
  ml::ModelKind kind = ml::ModelKind::RandomForest;
  ml::FeatureView view = ml::FeatureView::Combined88;
  ml::Hyperparameters hyper;
};

using DetectorSpec = std::variant<ThresholdDetectorSpec, MlDetectorSpec>;

inline std::string describe(const DetectorSpec &spec) {
  if (const auto *t = std::get_if<ThresholdDetectorSpec>(&spec)) {
    ThresholdConfig c;
    for (auto s : t->signals) c.entries.push_back({s, 1.0});
    return c.describe();
  }
  const auto &m = std::get<MlDetectorSpec>(spec);
  ml::ClassifierModel model;
  model.kind = m.kind;
  model.view = m.view;
  return model.describe();
}

/// "threshold:SMV_acc+FI", "rf:combined", "svm:acc", "knn:gyr".
inline DetectorSpec parse_detector(std::string_view text) {
  auto colon = text.find(':');
  auto head = text.substr(0, colon);
  auto tail = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "threshold") {
    ThresholdDetectorSpec t;
    t.signals.clear();
    if (tail.empty()) tail = "SMV_acc";
    std::size_t start = 0;
    while (start <= tail.size()) {
      auto plus = tail.find('+', start);
      auto name = tail.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
      auto s = parse_derived_signal(name);
      if (!s) throw Error(ErrorCode::InvalidConfig, "unknown threshold signal '" + std::string(name) + "'");
      t.signals.push_back(*s);
      if (plus == std::string_view::npos) break;
      start = plus + 1;
    }
    return t;
  }
  auto kind = ml::parse_model_kind(head);
  if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown detector '" + std::string(text) + "'");
  MlDetectorSpec m;
  m.kind = *kind;
  if (!tail.empty()) {
    auto view = ml::parse_feature_view(tail);
    if (!view) throw Error(ErrorCode::InvalidConfig, "unknown feature view '" + std::string(tail) + "'");
    m.view = *view;
  }
  return m;
}

/// Two single-signal threshold detectors plus RF and SVM on each feature view.
inline std::vector<DetectorSpec> standard_detector_set() {
  std::vector<DetectorSpec> out;
  out.push_back(ThresholdDetectorSpec{{DerivedSignal::SmvAcc}, {}, {}});
  out.push_back(ThresholdDetectorSpec{{DerivedSignal::FI}, {}, {}});
  for (auto kind : {ml::ModelKind::RandomForest, ml::ModelKind::LinearSVM})
    for (auto view : {ml::FeatureView::AccOnly44, ml::FeatureView::GyrOnly44, ml::FeatureView::Combined88})
      out.push_back(MlDetectorSpec{kind, view, {}});
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

struct WindowPrediction {
  std::string window_ref;
  std::string subject_id;
  Label actual;
  Label predicted;
  double score;
};

struct ExperimentResult {
  EvalReport report;
  SubjectSplit split;
  std::vector<WindowPrediction> predictions;
  std::optional<ThresholdConfig> thresholds;
  std::optional<ml::ClassifierModel> model;
};

/// Fit on development subjects only, then predict every evaluation window.
inline ExperimentResult run_experiment(PreparedCorpus &corpus, const DetectorSpec &spec,
                                       const SubjectSplit &split, std::uint64_t seed,
                                       AccessAudit *audit = nullptr) {
  ExperimentResult result;
  result.split = split;
  const std::string name = describe(spec);

  auto stage_error = [&](const char *stage, const Error &e) {
    return Error(e.code(), std::string(stage) + " [" + name + "]: " + e.what());
  };

  std::function<std::pair<Label, double>(const PreparedWindow &)> classify;

  if (const auto *t = std::get_if<ThresholdDetectorSpec>(&spec)) {
    ThresholdConfig config;
    if (t->fixed) {
      config = *t->fixed;
    } else {
      std::vector<CalibrationInput> dev;
      for (const auto &subject : split.dev_subjects)
        for (const auto &pw : corpus.windows(subject, Stage::Calibrate, audit))
          dev.push_back({pw.window.label, &pw.derived});
      try {
        config = calibrate(dev, t->signals, t->grids);
      } catch (const Error &e) {
        throw stage_error("calibrate", e);
      }
    }
    result.thresholds = config;
    classify = [config](const PreparedWindow &pw) {
      auto v = detect(pw.derived, config);
      return std::pair{v.label, v.score()};
    };
  } else {
    const auto &m = std::get<MlDetectorSpec>(spec);
    std::vector<FeatureVector> dev;
    for (const auto &subject : split.dev_subjects) {
      if (audit) audit->record(subject, Stage::Standardize);
      for (const auto &pw : corpus.windows(subject, Stage::Train, audit)) dev.push_back(pw.features);
    }
    try {
      result.model = ml::train(m.kind, m.view, dev, seed, m.hyper);
    } catch (const Error &e) {
      throw stage_error("train", e);
    }
    const ml::ClassifierModel *model = &*result.model;
    classify = [model](const PreparedWindow &pw) {
      auto p = ml::predict(*model, pw.features);
      return std::pair{p.label, p.score};
    };
  }

  std::vector<Outcome> outcomes;
  for (const auto &subject : split.eval_subjects)
    for (const auto &pw : corpus.windows(subject, Stage::Predict, audit)) {
      auto [label, score] = classify(pw);
      outcomes.push_back({label, pw.window.label});
      result.predictions.push_back({pw.features.window_ref, subject, pw.window.label, label, score});
    }
  result.report = compute_metrics(outcomes);
  result.report.detector = name;
  result.report.dataset = corpus.dataset();
  return result;
}

inline ExperimentResult run_experiment(std::span<const TrialRecording> trials, const std::string &dataset,
                                       const DetectorSpec &spec, std::uint64_t seed,
                                       AccessAudit *audit = nullptr, PrepareOptions options = {}) {
  PreparedCorpus corpus(trials, dataset, options);
  return run_experiment(corpus, spec, split(corpus.subjects(), seed), seed, audit);
}

// ---------------------------------------------------------------------------
// Rendering

inline nlohmann::json to_json(const EvalReport &r) {
  auto opt = [](const std::optional<double> &v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["detector"] = r.detector;
  j["dataset"] = r.dataset;
  j["confusion"] = {{"tp", r.confusion.tp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}};
  j["accuracy"] = opt(r.metrics.accuracy);
  j["sensitivity"] = opt(r.metrics.sensitivity);
  j["specificity"] = opt(r.metrics.specificity);
  return j;
}

inline EvalReport report_from_json(const nlohmann::json &j) {
  EvalReport r;
  r.detector = j.at("detector").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  const auto &c = j.at("confusion");
  r.confusion = {c.at("tp").get<std::size_t>(), c.at("fn").get<std::size_t>(), c.at("tn").get<std::size_t>(),
                 c.at("fp").get<std::size_t>()};
  auto opt = [&](const char *k) -> std::optional<double> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<double>();
  };
  r.metrics = {opt("accuracy"), opt("sensitivity"), opt("specificity")};
  return r;
}

struct ReportSet {
  std::string dataset;
  std::uint64_t seed = 0;
  SubjectSplit split;
  std::vector<EvalReport> reports;
};

inline nlohmann::json to_json(const ReportSet &set) {
  nlohmann::json j;
  j["dataset"] = set.dataset;
  j["seed"] = set.seed;
  j["split"] = {{"dev", set.split.dev_subjects}, {"eval", set.split.eval_subjects}};
  j["reports"] = nlohmann::json::array();
  for (const auto &r : set.reports) j["reports"].push_back(to_json(r));
  return j;
}

inline ReportSet report_set_from_json(const nlohmann::json &j) {
  ReportSet set;
  set.dataset = j.value("dataset", std::string());
  set.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("split")) {
    set.split.dev_subjects = j["split"].value("dev", std::vector<std::string>{});
    set.split.eval_subjects = j["split"].value("eval", std::vector<std::string>{});
  }
  for (const auto &r : j.at("reports")) set.reports.push_back(report_from_json(r));
  return set;
}

inline std::string format_percent(const std::optional<double> &v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << *v << '%';
  return os.str();
}

/// Plain-text table: one column per detector, rows Accuracy / SE / SP.
inline void write_text_table(std::ostream &os, const ReportSet &set) {
  os << "Dataset: " << set.dataset << "  (seed " << set.seed << ")\n";
  if (!set.split.eval_subjects.empty()) {
    os << "Evaluation subjects:";
    for (const auto &s : set.split.eval_subjects) os << ' ' << s;
    os << '\n';
  }
  const std::size_t label_width = 18;
  std::vector<std::size_t> widths;
  for (const auto &r : set.reports) widths.push_back(std::max<std::size_t>(r.detector.size(), 7));
  auto rule = [&] {
    os << std::string(label_width, '-');
    for (auto w : widths) os << "-+-" << std::string(w, '-');
    os << '\n';
  };
  os << std::left << std::setw(static_cast<int>(label_width)) << "";
  for (std::size_t i = 0; i < set.reports.size(); ++i)
    os << " | " << std::right << std::setw(static_cast<int>(widths[i])) << set.reports[i].detector;
  os << '\n';
  rule();
  auto row = [&](const char *label, auto getter) {
    os << std::left << std::setw(static_cast<int>(label_width)) << label;
    for (std::size_t i = 0; i < set.reports.size(); ++i)
      os << " | " << std::right << std::setw(static_cast<int>(widths[i]))
         << format_percent(getter(set.reports[i].metrics));
    os << '\n';
  };
  row("Accuracy", [](const Metrics &m) { return m.accuracy; });
  row("Sensitivity (SE)", [](const Metrics &m) { return m.sensitivity; });
  row("Specificity (SP)", [](const Metrics &m) { return m.specificity; });
}

inline void write_predictions_csv(std::ostream &os, const std::string &detector,
                                  std::span<const WindowPrediction> rows, bool header = true) {
  if (header) os << "detector,window_ref,subject_id,actual,predicted,score\n";
  for (const auto &p : rows)
    os << detector << ',' << p.window_ref << ',' << p.subject_id << ',' << to_string(p.actual) << ','
       << to_string(p.predicted) << ',' << format_double(p.score) << '\n';
}

} // namespace falldet
