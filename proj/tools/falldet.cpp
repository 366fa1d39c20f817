// falldet: command-line front end for ingestion, calibration, training,
// evaluation, streaming detection and plot-data export.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#ifdef FALLDET_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "falldet/dataset.hpp"
#include "falldet/evaluation.hpp"
#include "falldet/stream.hpp"

namespace fs = std::filesystem;
using namespace falldet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidConfig:
  case ErrorCode::NoSignalsEnabled: return kExitUsage;
  case ErrorCode::ModelNotFitted: return kExitInternal;
  default: return kExitData;
  }
}

struct CommonOptions {
  std::uint64_t seed = 42;
  double window_seconds = kDefaultWindowSeconds;
};

PrepareOptions prepare_options(const CommonOptions &c) {
  PrepareOptions o;
  o.window_seconds = c.window_seconds;
  return o;
}

/// Relative manifest paths that do not exist locally are looked up in
/// $FALLDET_MANIFEST_DIR.
fs::path resolve_manifest(const fs::path &path) {
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char *dir = std::getenv("FALLDET_MANIFEST_DIR")) {
    fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate;
  }
  return path;
}

std::ofstream open_out(const fs::path &path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  return out;
}

std::vector<TrialRecording> load_corpus(const fs::path &dir) {
  if (!fs::exists(dir)) throw Error(ErrorCode::Io, "corpus '" + dir.string() + "' not found");
  return read_canonical(dir);
}

std::string dataset_name(const std::vector<TrialRecording> &trials, const fs::path &dir) {
  if (!trials.empty() && trials.front().source != Source::Canonical) return to_string(trials.front().source);
  return dir.filename().string();
}

void print_triple(const EvalReport &r) {
  std::cout << r.detector << ": accuracy " << format_percent(r.metrics.accuracy) << ", SE "
            << format_percent(r.metrics.sensitivity) << ", SP " << format_percent(r.metrics.specificity)
            << '\n';
}

// --- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string manifest;
  std::string out;
};

void cmd_ingest(const IngestArgs &a) {
  auto manifest = load_manifest(resolve_manifest(a.manifest));
  auto corpus = ingest(manifest);
  write_canonical(corpus.trials, a.out);

  nlohmann::json report;
  report["source"] = to_string(manifest.source);
  report["trials"] = corpus.report.trials;
  report["adl"] = corpus.report.adl;
  report["fall"] = corpus.report.fall;
  report["subjects"] = std::vector<std::string>(corpus.report.subjects.begin(), corpus.report.subjects.end());
  report["files_seen"] = corpus.report.files_seen;
  report["files_matched"] = corpus.report.files_matched;
  report["skipped"] = nlohmann::json::array();
  for (const auto &s : corpus.report.skipped) report["skipped"].push_back({{"path", s.path}, {"reason", s.reason}});
  auto out = open_out(fs::path(a.out) / "ingest_report.json");
  out << report.dump(2) << '\n';

  std::cout << corpus.report.summary() << ", " << corpus.report.subjects.size() << " subjects\n";
  if (!corpus.report.skipped.empty())
    std::cerr << corpus.report.skipped.size() << " files skipped (see ingest_report.json)\n";
  if (manifest.expected)
    if (auto mismatch = corpus.report.check(*manifest.expected); !mismatch.empty())
      std::cerr << "warning: " << mismatch << '\n';
}

// --- synthesize -------------------------------------------------------------

struct SynthArgs {
  std::size_t subjects = 10;
  std::size_t trials = 20;
  double rate = 25.0;
  std::string out;
};

void cmd_synthesize(const SynthArgs &a, const CommonOptions &c) {
  auto trials = synthesize(c.seed, a.subjects, a.trials, a.rate);
  write_canonical(trials, a.out);
  std::size_t falls = 0;
  for (const auto &t : trials) falls += t.label == Label::Fall ? 1 : 0;
  std::cout << trials.size() << " trials (" << trials.size() - falls << " ADL / " << falls << " fall)\n";
}

// --- calibrate --------------------------------------------------------------

struct CalibrateArgs {
  std::string corpus;
  std::string signals = "SMV_acc";
  std::string out;
};

void cmd_calibrate(const CalibrateArgs &a, const CommonOptions &c) {
  auto trials = load_corpus(a.corpus);
  PreparedCorpus corpus(trials, dataset_name(trials, a.corpus), prepare_options(c));
  auto sub = split(corpus.subjects(), c.seed);
  auto spec = parse_detector("threshold:" + a.signals);
  auto result = run_experiment(corpus, spec, sub, c.seed);
  auto out = open_out(a.out);
  write_threshold_config(out, *result.thresholds);
  write_threshold_config(std::cout, *result.thresholds);
  print_triple(result.report);
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string kind = "rf";
  std::string view = "combined";
  std::string out;
  std::size_t knn_k = 5;
  std::size_t trees = 100;
  std::size_t max_depth = 16;
  double svm_lambda = 1e-3;
  std::size_t svm_epochs = 50;
};

ml::Hyperparameters hyper_from(const TrainArgs &a) {
  ml::Hyperparameters h;
  h.knn_k = a.knn_k;
  h.forest.n_trees = a.trees;
  h.forest.max_depth = a.max_depth;
  h.svm.lambda = a.svm_lambda;
  h.svm.epochs = a.svm_epochs;
  return h;
}

void cmd_train(const TrainArgs &a, const CommonOptions &c) {
  auto trials = load_corpus(a.corpus);
  PreparedCorpus corpus(trials, dataset_name(trials, a.corpus), prepare_options(c));
  auto sub = split(corpus.subjects(), c.seed);
  auto spec = parse_detector(a.kind + ":" + a.view);
  std::get<MlDetectorSpec>(spec).hyper = hyper_from(a);
  auto result = run_experiment(corpus, spec, sub, c.seed);
  auto out = open_out(a.out);
  ml::write_model(out, *result.model);
  print_triple(result.report);
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string corpus;
  std::vector<std::string> detectors;
  std::string out;
};

void cmd_evaluate(const EvaluateArgs &a, const CommonOptions &c) {
  std::vector<TrialRecording> trials;
  try {
    trials = load_corpus(a.corpus);
  } catch (const Error &e) {
    throw Error(e.code(), std::string("ingest: ") + e.what());
  }
  std::vector<DetectorSpec> specs;
  if (a.detectors.empty() || (a.detectors.size() == 1 && a.detectors.front() == "all")) {
    specs = standard_detector_set();
  } else {
    for (const auto &d : a.detectors) specs.push_back(parse_detector(d));
  }

  PreparedCorpus corpus(trials, dataset_name(trials, a.corpus), prepare_options(c));
  ReportSet set;
  set.dataset = corpus.dataset();
  set.seed = c.seed;
  set.split = split(corpus.subjects(), c.seed);

  fs::create_directories(a.out);
  auto predictions = open_out(fs::path(a.out) / "predictions.csv");
  bool header = true;
  for (const auto &spec : specs) {
    auto result = run_experiment(corpus, spec, set.split, c.seed);
    write_predictions_csv(predictions, result.report.detector, result.predictions, header);
    header = false;
    print_triple(result.report);
    set.reports.push_back(result.report);
  }
  auto json = open_out(fs::path(a.out) / "report.json");
  json << to_json(set).dump(2) << '\n';
  auto text = open_out(fs::path(a.out) / "report.txt");
  write_text_table(text, set);
}

// --- detect-stream ----------------------------------------------------------

struct StreamArgs {
  std::string thresholds;
  std::string model;
  std::string input = "-";
  double rate = 25.0;
};

void cmd_detect_stream(const StreamArgs &a, const CommonOptions &c) {
  StreamDetector detector = [&]() -> StreamDetector {
    if (!a.model.empty()) {
      std::ifstream in(a.model);
      if (!in) throw Error(ErrorCode::Io, "cannot open model '" + a.model + "'");
      return ml::read_model(in);
    }
    std::ifstream in(a.thresholds);
    if (!in) throw Error(ErrorCode::Io, "cannot open thresholds '" + a.thresholds + "'");
    return read_threshold_config(in);
  }();
  StreamOptions options;
  options.window_seconds = c.window_seconds;
  options.sample_rate_hz = a.rate;
  StreamingDetector stream(std::move(detector), options);

  std::ifstream file;
  if (a.input != "-") {
    file.open(a.input);
    if (!file) throw Error(ErrorCode::Io, "cannot open '" + a.input + "'");
  }
  std::istream &in = a.input == "-" ? std::cin : file;

  auto emit = [](const std::optional<StreamEvent> &e) {
    if (e) std::cout << format_double(e->t_end) << ',' << to_string(e->label) << ',' << format_double(e->score) << '\n';
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty() || text == kCanonicalHeader) continue;
    std::string why;
    auto sample = parse_canonical_row(text, &why);
    if (!sample) {
      std::cerr << "warning: line " << line_no << ": " << why << " (skipped)\n";
      continue;
    }
    if (auto reason = stream.reject_reason(*sample)) {
      std::cerr << "warning: line " << line_no << ": " << *reason << " (skipped)\n";
      continue;
    }
    emit(stream.push(*sample));
  }
  emit(stream.finish());
}

// --- export-plots -----------------------------------------------------------

struct ExportArgs {
  std::string corpus;
  std::string report;
  std::vector<std::size_t> trials;
  bool all = false;
  std::string out;
};

void export_trial(const TrialRecording &t, const fs::path &path) {
  auto d = derive_all(std::span<const SensorSample>(t.samples), t.sample_rate_hz);
  auto out = open_out(path);
  out << "t,SMV_acc,FI,AVD,SMV_gyr\n";
  for (std::size_t i = 0; i < t.samples.size(); ++i)
    out << format_double(t.samples[i].t) << ',' << format_double(d.smv_acc[i]) << ',' << format_double(d.fi[i])
        << ',' << format_double(d.avd[i]) << ',' << format_double(d.smv_gyr[i]) << '\n';
}

void export_report(const ReportSet &set, const fs::path &dir) {
  auto value = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string(); };
  auto metrics = open_out(dir / "metrics.csv");
  metrics << "metric";
  for (const auto &r : set.reports) metrics << ',' << r.detector;
  metrics << '\n';
  const std::array<std::pair<const char *, std::optional<double> Metrics::*>, 3> rows{
      std::pair{"accuracy", &Metrics::accuracy}, std::pair{"sensitivity", &Metrics::sensitivity},
      std::pair{"specificity", &Metrics::specificity}};
  for (const auto &[name, member] : rows) {
    metrics << name;
    for (const auto &r : set.reports) metrics << ',' << value(r.metrics.*member);
    metrics << '\n';
  }
  auto detectors = open_out(dir / "detectors.csv");
  detectors << "dataset,detector,accuracy,sensitivity,specificity,tp,fn,tn,fp\n";
  for (const auto &r : set.reports)
    detectors << r.dataset << ',' << r.detector << ',' << value(r.metrics.accuracy) << ','
              << value(r.metrics.sensitivity) << ',' << value(r.metrics.specificity) << ',' << r.confusion.tp
              << ',' << r.confusion.fn << ',' << r.confusion.tn << ',' << r.confusion.fp << '\n';
}

void cmd_export_plots(const ExportArgs &a) {
  if (a.corpus.empty() == a.report.empty())
    throw Error(ErrorCode::InvalidConfig, "give exactly one of --corpus or --report");
  if (!a.report.empty()) {
    std::ifstream in(a.report);
    if (!in) throw Error(ErrorCode::Io, "cannot open report '" + a.report + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError, a.report + ": " + e.what());
    }
    ReportSet set = j.contains("reports") ? report_set_from_json(j) : ReportSet{"", 0, {}, {report_from_json(j)}};
    export_report(set, a.out);
    return;
  }
  auto trials = load_corpus(a.corpus);
  std::vector<std::size_t> picks = a.trials;
  if (a.all) {
    picks.clear();
    for (std::size_t i = 0; i < trials.size(); ++i) picks.push_back(i);
  } else if (picks.empty()) {
    picks.push_back(0);
  }
  for (auto i : picks) {
    if (i >= trials.size()) throw Error(ErrorCode::InvalidConfig, "trial index " + std::to_string(i) + " out of range");
    char name[48];
    std::snprintf(name, sizeof(name), "trial_%06zu.csv", i);
    export_trial(trials[i], fs::path(a.out) / name);
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Fall detection toolkit for wrist-worn IMU recordings"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI config file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", "falldet 1.0.0");

  CommonOptions common;
  auto add_seed = [&](CLI::App *sub) {
    sub->add_option("--seed", common.seed, "Seed for every random choice (split, forests, SVM shuffling)")
        ->capture_default_str();
  };
  auto add_window = [&](CLI::App *sub) {
    sub->add_option("--window-seconds", common.window_seconds, "Analysis window length in seconds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  IngestArgs ingest_args;
  auto *ingest_cmd = app.add_subcommand("ingest", "Parse a raw corpus described by a manifest into canonical form");
  ingest_cmd->add_option("--manifest", ingest_args.manifest, "Manifest JSON (relative paths also searched in $FALLDET_MANIFEST_DIR)")
      ->required();
  ingest_cmd->add_option("--out", ingest_args.out, "Output directory for the canonical corpus")->required();

  SynthArgs synth_args;
  auto *synth_cmd = app.add_subcommand("synthesize", "Generate a synthetic labelled corpus");
  add_seed(synth_cmd);
  synth_cmd->add_option("--subjects", synth_args.subjects, "Number of subjects (>= 2)")->capture_default_str();
  synth_cmd->add_option("--trials", synth_args.trials, "Trials per subject (alternating ADL / fall)")->capture_default_str();
  synth_cmd->add_option("--rate", synth_args.rate, "Sample rate in Hz")->capture_default_str()->check(CLI::Range(15.0, 30.0));
  synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

  CalibrateArgs cal_args;
  auto *cal_cmd = app.add_subcommand("calibrate", "Calibrate threshold detector on the development split");
  add_seed(cal_cmd);
  add_window(cal_cmd);
  cal_cmd->add_option("--corpus", cal_args.corpus, "Canonical corpus directory")->required();
  cal_cmd->add_option("--signals", cal_args.signals, "Signals joined by '+': SMV_acc, SMV_gyr, FI, AVD")->capture_default_str();
  cal_cmd->add_option("--out", cal_args.out, "Threshold config file to write")->required();

  TrainArgs train_args;
  auto *train_cmd = app.add_subcommand("train", "Train a classifier on the development split");
  add_seed(train_cmd);
  add_window(train_cmd);
  train_cmd->add_option("--corpus", train_args.corpus, "Canonical corpus directory")->required();
  train_cmd->add_option("--kind", train_args.kind, "knn | rf | svm")->capture_default_str();
  train_cmd->add_option("--view", train_args.view, "acc | gyr | combined")->capture_default_str();
  train_cmd->add_option("--knn-k", train_args.knn_k, "Neighbours for KNN")->capture_default_str();
  train_cmd->add_option("--trees", train_args.trees, "Random forest size")->capture_default_str();
  train_cmd->add_option("--max-depth", train_args.max_depth, "Tree depth limit (0 = unlimited)")->capture_default_str();
  train_cmd->add_option("--svm-lambda", train_args.svm_lambda, "SVM L2 regularisation")->capture_default_str();
  train_cmd->add_option("--svm-epochs", train_args.svm_epochs, "SVM epochs")->capture_default_str();
  train_cmd->add_option("--out", train_args.out, "Model file to write")->required();

  EvaluateArgs eval_args;
  auto *eval_cmd = app.add_subcommand("evaluate", "Run detectors with a subject-disjoint 80/20 split");
  add_seed(eval_cmd);
  add_window(eval_cmd);
  eval_cmd->add_option("--corpus", eval_args.corpus, "Canonical corpus directory")->required();
  eval_cmd->add_option("--detector", eval_args.detectors,
                       "Repeatable: threshold:SIG[+SIG...], rf:VIEW, svm:VIEW, knn:VIEW, or 'all' (default)");
  eval_cmd->add_option("--out", eval_args.out, "Output directory (report.json, report.txt, predictions.csv)")->required();

  StreamArgs stream_args;
  auto *stream_cmd = app.add_subcommand(
      "detect-stream", "Read canonical CSV rows (t,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z) and print t_end,label,score per window");
  add_window(stream_cmd);
  auto *thr_opt = stream_cmd->add_option("--thresholds", stream_args.thresholds, "Threshold config file");
  auto *model_opt = stream_cmd->add_option("--model", stream_args.model, "Model file from 'train'");
  thr_opt->excludes(model_opt);
  stream_cmd->add_option("--input", stream_args.input, "Input file, '-' for stdin")->capture_default_str();
  stream_cmd->add_option("--rate", stream_args.rate, "Nominal sample rate in Hz (0 = estimate per window)")->capture_default_str();

  ExportArgs export_args;
  auto *export_cmd = app.add_subcommand(
      "export-plots",
      "Write plot-ready CSV. --corpus: trial_NNNNNN.csv with columns t,SMV_acc,FI,AVD,SMV_gyr. "
      "--report: metrics.csv (metric,<detector>...; rows accuracy,sensitivity,specificity) and "
      "detectors.csv (dataset,detector,accuracy,sensitivity,specificity,tp,fn,tn,fp)");
  export_cmd->add_option("--corpus", export_args.corpus, "Canonical corpus directory");
  export_cmd->add_option("--report", export_args.report, "report.json from 'evaluate'");
  export_cmd->add_option("--trial", export_args.trials, "Trial index to export (repeatable; default 0)");
  export_cmd->add_flag("--all", export_args.all, "Export every trial");
  export_cmd->add_option("--out", export_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) cmd_ingest(ingest_args);
    else if (*synth_cmd) cmd_synthesize(synth_args, common);
    else if (*cal_cmd) cmd_calibrate(cal_args, common);
    else if (*train_cmd) cmd_train(train_args, common);
    else if (*eval_cmd) cmd_evaluate(eval_args, common);
    else if (*stream_cmd) {
      if (stream_args.thresholds.empty() && stream_args.model.empty())
        throw Error(ErrorCode::InvalidConfig, "detect-stream needs --thresholds or --model");
      cmd_detect_stream(stream_args, common);
    } else if (*export_cmd) cmd_export_plots(export_args);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
