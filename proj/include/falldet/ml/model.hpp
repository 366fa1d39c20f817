#pragma once

// Trained classifier bundle: kind, feature view, standardiser and learned
// state, with a versioned text serialisation that round-trips bit-exactly.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "falldet/features.hpp"
#include "falldet/ml/forest.hpp"
#include "falldet/ml/knn.hpp"
#include "falldet/ml/standardizer.hpp"
#include "falldet/ml/svm.hpp"
#include "falldet/numfmt.hpp"

namespace falldet::ml {

enum class ModelKind { KNN, RandomForest, LinearSVM };
enum class FeatureView { AccOnly44, GyrOnly44, Combined88 };

inline const char *to_string(ModelKind k) {
  switch (k) {
  case ModelKind::KNN: return "KNN";
  case ModelKind::RandomForest: return "RandomForest";
  case ModelKind::LinearSVM: return "LinearSVM";
  }
  return "?";
}

inline const char *to_string(FeatureView v) {
  switch (v) {
  case FeatureView::AccOnly44: return "AccOnly44";
  case FeatureView::GyrOnly44: return "GyrOnly44";
  case FeatureView::Combined88: return "Combined88";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "KNN" || s == "knn") return ModelKind::KNN;
  if (s == "RandomForest" || s == "rf" || s == "RF") return ModelKind::RandomForest;
  if (s == "LinearSVM" || s == "svm" || s == "SVM") return ModelKind::LinearSVM;
  return std::nullopt;
}

inline std::optional<FeatureView> parse_feature_view(std::string_view s) {
  if (s == "AccOnly44" || s == "acc") return FeatureView::AccOnly44;
  if (s == "GyrOnly44" || s == "gyr") return FeatureView::GyrOnly44;
  if (s == "Combined88" || s == "combined" || s == "all") return FeatureView::Combined88;
  return std::nullopt;
}

/// Half-open slice [first, last) of the canonical 88-entry ordering.
inline std::pair<std::size_t, std::size_t> view_range(FeatureView v) {
  switch (v) {
  case FeatureView::AccOnly44: return {0, kFeaturesPerSensor};
  case FeatureView::GyrOnly44: return {kFeaturesPerSensor, kFeatureCount};
  case FeatureView::Combined88: return {0, kFeatureCount};
  }
  return {0, kFeatureCount};
}

inline Row slice(const FeatureVector &fv, FeatureView v) {
  auto [first, last] = view_range(v);
  return Row(fv.values.begin() + static_cast<std::ptrdiff_t>(first),
             fv.values.begin() + static_cast<std::ptrdiff_t>(last));
}

struct Hyperparameters {
  std::size_t knn_k = 5;
  ForestParams forest;
  SvmParams svm;
};

struct ClassifierModel {
  ModelKind kind = ModelKind::RandomForest;
  FeatureView view = FeatureView::Combined88;
  Hyperparameters hyper;
  std::uint64_t seed = 0;
  Standardizer standardizer;
  std::variant<std::monostate, KnnClassifier, RandomForest, LinearSvm> state;

  bool fitted() const { return !std::holds_alternative<std::monostate>(state); }

  std::string describe() const {
    std::string k = kind == ModelKind::RandomForest ? "RF"
                    : kind == ModelKind::LinearSVM ? "SVM"
                                                   : "KNN";
    return k + "(" + to_string(view) + ")";
  }
};

inline void check_complete(const FeatureVector &fv) {
  for (double v : fv.values)
    if (!std::isfinite(v))
      throw Error(ErrorCode::IncompleteFeatureVector, "feature vector '" + fv.window_ref + "'");
}

inline ClassifierModel train(ModelKind kind, FeatureView view, std::span<const FeatureVector> dev,
                             std::uint64_t seed, const Hyperparameters &hyper = {}) {
  std::size_t falls = 0;
  for (const auto &fv : dev) {
    check_complete(fv);
    falls += fv.label == Label::Fall ? 1 : 0;
  }
  if (falls == 0 || falls == dev.size())
    throw Error(ErrorCode::SingleClassTrainingSet, "training set needs both Fall and ADL");

  ClassifierModel model;
  model.kind = kind;
  model.view = view;
  model.hyper = hyper;
  model.seed = seed;

  std::vector<Row> raw;
  raw.reserve(dev.size());
  std::vector<Label> labels;
  labels.reserve(dev.size());
  for (const auto &fv : dev) {
    raw.push_back(slice(fv, view));
    labels.push_back(fv.label);
  }
  model.standardizer = Standardizer::fit(raw);
  std::vector<Row> rows;
  rows.reserve(raw.size());
  for (const auto &r : raw) rows.push_back(model.standardizer.transform(r));

  switch (kind) {
  case ModelKind::KNN: {
    KnnClassifier knn(hyper.knn_k);
    knn.fit(std::move(rows), std::move(labels));
    model.state = std::move(knn);
    break;
  }
  case ModelKind::RandomForest: {
    RandomForest rf(hyper.forest);
    rf.fit(rows, labels, seed);
    model.state = std::move(rf);
    break;
  }
  case ModelKind::LinearSVM: {
    LinearSvm svm(hyper.svm);
    svm.fit(rows, labels, seed);
    model.state = std::move(svm);
    break;
  }
  }
  return model;
}

inline Prediction predict_row(const ClassifierModel &model, std::span<const double> raw) {
  if (!model.fitted()) throw Error(ErrorCode::ModelNotFitted, model.describe());
  Row x = model.standardizer.transform(raw);
  return std::visit(
      [&](const auto &clf) -> Prediction {
        using T = std::decay_t<decltype(clf)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          throw Error(ErrorCode::ModelNotFitted, "no learned state");
        } else {
          return clf.predict(x);
        }
      },
      model.state);
}

inline Prediction predict(const ClassifierModel &model, const FeatureVector &fv) {
  return predict_row(model, slice(fv, model.view));
}

// ---------------------------------------------------------------------------
// Serialisation. Whitespace-separated tokens; doubles use the shortest
// round-trip decimal form.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_doubles(std::ostream &os, const char *key, std::span<const double> values) {
  os << key << ' ' << values.size();
  for (double v : values) os << ' ' << format_double(v);
  os << '\n';
}

class TokenReader {
public:
  explicit TokenReader(std::istream &is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw Error(ErrorCode::ParseError, "model file truncated");
    return w;
  }
  void expect(const std::string &w) {
    auto got = word();
    if (got != w) throw Error(ErrorCode::ParseError, "model file: expected '" + w + "', got '" + got + "'");
  }
  double number() {
    auto w = word();
    auto v = parse_double(w);
    if (!v) throw Error(ErrorCode::ParseError, "model file: bad number '" + w + "'");
    return *v;
  }
  std::uint64_t integer() {
    auto w = word();
    try {
      std::size_t pos = 0;
      auto v = std::stoull(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
      return v;
    } catch (const std::exception &) {
      throw Error(ErrorCode::ParseError, "model file: bad integer '" + w + "'");
    }
  }
  std::vector<double> doubles(const std::string &key) {
    expect(key);
    auto n = integer();
    std::vector<double> out(n);
    for (auto &v : out) v = number();
    return out;
  }

private:
  std::istream &is_;
};

} // namespace detail

inline void write_model(std::ostream &os, const ClassifierModel &model) {
  if (!model.fitted()) throw Error(ErrorCode::ModelNotFitted, model.describe());
  os << "falldet-model " << kModelFormatVersion << '\n';
  os << "kind " << to_string(model.kind) << '\n';
  os << "view " << to_string(model.view) << '\n';
  os << "seed " << model.seed << '\n';
  const auto &h = model.hyper;
  os << "knn_k " << h.knn_k << '\n';
  os << "forest " << h.forest.n_trees << ' ' << h.forest.max_depth << ' ' << h.forest.max_features
     << ' ' << h.forest.min_leaf << ' ' << (h.forest.bootstrap ? 1 : 0) << '\n';
  os << "svm " << format_double(h.svm.lambda) << ' ' << h.svm.epochs << '\n';
  detail::write_doubles(os, "std_mean", model.standardizer.mean());
  detail::write_doubles(os, "std_scale", model.standardizer.stddev());

  if (const auto *knn = std::get_if<KnnClassifier>(&model.state)) {
    os << "knn_rows " << knn->rows().size() << '\n';
    for (std::size_t i = 0; i < knn->rows().size(); ++i) {
      os << to_string(knn->labels()[i]);
      for (double v : knn->rows()[i]) os << ' ' << format_double(v);
      os << '\n';
    }
  } else if (const auto *rf = std::get_if<RandomForest>(&model.state)) {
    os << "trees " << rf->trees().size() << '\n';
    for (const auto &tree : rf->trees()) {
      os << "tree " << tree.nodes().size() << '\n';
      for (const auto &n : tree.nodes())
        os << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right
           << ' ' << to_string(n.label) << ' ' << format_double(n.fall_fraction) << '\n';
    }
  } else if (const auto *svm = std::get_if<LinearSvm>(&model.state)) {
    detail::write_doubles(os, "weights", svm->weights());
    os << "bias " << format_double(svm->bias()) << '\n';
  }
  os << "end\n";
}

inline ClassifierModel read_model(std::istream &is) {
  detail::TokenReader in(is);
  in.expect("falldet-model");
  if (auto version = in.integer(); version != kModelFormatVersion)
    throw Error(ErrorCode::ParseError, "unsupported model format version " + std::to_string(version));

  ClassifierModel model;
  in.expect("kind");
  auto kind = parse_model_kind(in.word());
  if (!kind) throw Error(ErrorCode::ParseError, "model file: unknown kind");
  model.kind = *kind;
  in.expect("view");
  auto view = parse_feature_view(in.word());
  if (!view) throw Error(ErrorCode::ParseError, "model file: unknown view");
  model.view = *view;
  in.expect("seed");
  model.seed = in.integer();
  in.expect("knn_k");
  model.hyper.knn_k = in.integer();
  in.expect("forest");
  model.hyper.forest.n_trees = in.integer();
  model.hyper.forest.max_depth = in.integer();
  model.hyper.forest.max_features = in.integer();
  model.hyper.forest.min_leaf = in.integer();
  model.hyper.forest.bootstrap = in.integer() != 0;
  in.expect("svm");
  model.hyper.svm.lambda = in.number();
  model.hyper.svm.epochs = in.integer();
  auto mean = in.doubles("std_mean");
  auto scale = in.doubles("std_scale");
  if (mean.size() != scale.size()) throw Error(ErrorCode::ParseError, "standardiser size mismatch");
  const std::size_t dim = mean.size();
  model.standardizer = Standardizer(std::move(mean), std::move(scale));

  auto label_of = [](const std::string &w) { return parse_label(w); };
  switch (model.kind) {
  case ModelKind::KNN: {
    in.expect("knn_rows");
    auto n = in.integer();
    std::vector<Row> rows(n, Row(dim));
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = label_of(in.word());
      for (auto &v : rows[i]) v = in.number();
    }
    KnnClassifier knn(model.hyper.knn_k);
    knn.fit(std::move(rows), std::move(labels));
    model.state = std::move(knn);
    break;
  }
  case ModelKind::RandomForest: {
    in.expect("trees");
    auto n_trees = in.integer();
    std::vector<DecisionTree> trees;
    trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
      in.expect("tree");
      auto n_nodes = in.integer();
      std::vector<TreeNode> nodes(n_nodes);
      for (auto &node : nodes) {
        node.feature = std::stoi(in.word());
        node.threshold = in.number();
        node.left = std::stoi(in.word());
        node.right = std::stoi(in.word());
        node.label = label_of(in.word());
        node.fall_fraction = in.number();
        if (node.feature >= static_cast<int>(dim))
          throw Error(ErrorCode::ParseError, "tree node feature out of range");
        if (node.feature >= 0 && (node.left < 0 || node.right < 0 ||
                                  node.left >= static_cast<int>(n_nodes) ||
                                  node.right >= static_cast<int>(n_nodes)))
          throw Error(ErrorCode::ParseError, "tree node child out of range");
      }
      trees.emplace_back(std::move(nodes));
    }
    RandomForest rf(model.hyper.forest);
    rf.set_trees(std::move(trees));
    model.state = std::move(rf);
    break;
  }
  case ModelKind::LinearSVM: {
    auto w = in.doubles("weights");
    in.expect("bias");
    double b = in.number();
    LinearSvm svm(model.hyper.svm);
    svm.set_state(std::move(w), b);
    model.state = std::move(svm);
    break;
  }
  }
  in.expect("end");
  return model;
}

} // namespace falldet::ml
