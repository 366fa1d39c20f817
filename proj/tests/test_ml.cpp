#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "falldet/ml/model.hpp"

using namespace falldet;
using namespace falldet::ml;

namespace {

// Fall when the acc block's first feature plus noise is positive.
std::vector<FeatureVector> toy_features(std::mt19937_64 &rng, std::size_t n, double gap = 1.5) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureVector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto &fv = out[i];
    fv.label = i % 2 ? Label::Fall : Label::ADL;
    for (auto &v : fv.values) v = g(rng);
    double shift = fv.label == Label::Fall ? gap : -gap;
    fv.values[0] += shift;
    fv.values[3] += shift;
    fv.values[kFeaturesPerSensor + 3] += shift;
    fv.subject_id = "S" + std::to_string(i % 5);
    fv.window_ref = "w" + std::to_string(i);
  }
  return out;
}

std::vector<Row> rows_of(const std::vector<FeatureVector> &f, FeatureView v) {
  std::vector<Row> r;
  for (const auto &x : f) r.push_back(slice(x, v));
  return r;
}

double sqdist(const Row &a, const Row &b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

} // namespace

TEST(Knn, KEqualsOneReturnsOwnLabel) {
  std::mt19937_64 rng(41);
  auto f = toy_features(rng, 40, 0.2);
  std::vector<Row> rows = rows_of(f, FeatureView::Combined88);
  std::vector<Label> labels;
  for (const auto &x : f) labels.push_back(x.label);
  KnnClassifier knn(1);
  knn.fit(rows, labels);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(knn.predict(rows[i]).label, labels[i]);
}

TEST(Knn, ThreeNeighbourVote) {
  KnnClassifier knn(3);
  knn.fit({{0.0}, {1.0}, {2.0}, {10.0}}, {Label::Fall, Label::ADL, Label::Fall, Label::ADL});
  auto p = knn.predict(std::vector<double>{1.1});
  EXPECT_EQ(p.label, Label::Fall);
  EXPECT_NEAR(p.score, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(knn.predict(std::vector<double>{9.0}).label, Label::ADL); // neighbours 10, 2, 1
}

TEST(Knn, NeighboursMatchAllPairsOracle) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> coarse(0, 3); // many exact duplicates and distance ties
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Row> rows(200, Row(4));
    std::vector<Label> labels(200);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (auto &v : rows[i]) v = coarse(rng);
      labels[i] = (rng() & 1) ? Label::Fall : Label::ADL;
    }
    KnnClassifier knn(5);
    knn.fit(rows, labels);
    for (int q = 0; q < 20; ++q) {
      Row x(4);
      for (auto &v : x) v = coarse(rng);
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < rows.size(); ++i) all.push_back({sqdist(rows[i], x), i});
      std::sort(all.begin(), all.end());
      auto got = knn.neighbours(x);
      ASSERT_EQ(got.size(), 5u);
      int falls = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_EQ(got[k], all[k].second);
        falls += labels[all[k].second] == Label::Fall;
      }
      EXPECT_EQ(knn.predict(x).label, falls >= 3 ? Label::Fall : Label::ADL);
    }
  }
}

TEST(Knn, EvenKTieGoesToFall) {
  KnnClassifier knn(2);
  knn.fit({{0.0}, {1.0}}, {Label::ADL, Label::Fall});
  EXPECT_EQ(knn.predict(std::vector<double>{0.5}).label, Label::Fall);
}

TEST(Standardizer, ZeroMeanUnitVarianceAndConstantColumns) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g(5.0, 3.0);
  std::vector<Row> rows(300, Row(3));
  for (auto &r : rows) r = {g(rng), 2.5, g(rng) * 100.0};
  auto s = Standardizer::fit(rows);
  EXPECT_TRUE(s.is_constant(1));
  double m0 = 0, m2 = 0, v0 = 0, v2 = 0;
  for (const auto &r : rows) {
    auto z = s.transform(r);
    EXPECT_EQ(z[1], 0.0);
    m0 += z[0];
    m2 += z[2];
    v0 += z[0] * z[0];
    v2 += z[2] * z[2];
  }
  const double n = double(rows.size());
  EXPECT_NEAR(m0 / n, 0.0, 1e-12);
  EXPECT_NEAR(m2 / n, 0.0, 1e-12);
  EXPECT_NEAR(v0 / n, 1.0, 1e-12);
  EXPECT_NEAR(v2 / n, 1.0, 1e-12);
}

TEST(Svm, SeparableToyReachesFullTrainingAccuracy) {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<Row> rows;
  std::vector<Label> labels;
  for (int i = 0; i < 100; ++i) {
    bool fall = i % 2;
    double c = fall ? 2.0 : -2.0;
    rows.push_back({c + g(rng), c + g(rng)});
    labels.push_back(fall ? Label::Fall : Label::ADL);
  }
  LinearSvm svm;
  svm.fit(rows, labels, 7);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(svm.predict(rows[i]).label, labels[i]);
}

TEST(Svm, ZeroMarginIsFall) {
  LinearSvm svm;
  svm.set_state({0.0, 0.0}, 0.0);
  std::vector<double> x{1.0, -1.0};
  EXPECT_EQ(svm.margin(x), 0.0);
  EXPECT_EQ(svm.predict(x).label, Label::Fall);
  svm.set_state({1.0, 0.0}, 0.0);
  EXPECT_EQ(svm.predict(std::vector<double>{-0.001, 0.0}).label, Label::ADL);
}

TEST(Forest, SingleFullTreeMemorises) {
  std::vector<Row> rows{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}, {2, 3}, {3, 2}, {3, 3}};
  std::vector<Label> labels{Label::Fall, Label::ADL, Label::ADL, Label::Fall,
                            Label::ADL, Label::Fall, Label::Fall, Label::ADL};
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.max_features = 2;
  p.max_depth = 0;
  RandomForest rf(p);
  rf.fit(rows, labels, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rf.predict(rows[i]).label, labels[i]) << i;
}

TEST(Forest, ReproducibleAcrossThreadCounts) {
  std::mt19937_64 rng(45);
  auto f = toy_features(rng, 60, 0.5);
  auto rows = rows_of(f, FeatureView::Combined88);
  std::vector<Label> labels;
  for (const auto &x : f) labels.push_back(x.label);
  ForestParams one;
  one.n_trees = 20;
  one.threads = 1;
  ForestParams many = one;
  many.threads = 4;
  RandomForest a(one), b(many), c(one);
  a.fit(rows, labels, 99);
  b.fit(rows, labels, 99);
  c.fit(rows, labels, 100);
  ASSERT_EQ(a.trees().size(), 20u);
  bool any_diff = false;
  for (std::size_t t = 0; t < 20; ++t) {
    EXPECT_EQ(a.trees()[t].nodes(), b.trees()[t].nodes());
    any_diff |= a.trees()[t].nodes() != c.trees()[t].nodes();
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, KnnInvariantToPerFeatureAffineMaps) {
  std::mt19937_64 rng(46);
  auto train_set = toy_features(rng, 80, 0.7);
  auto test_set = toy_features(rng, 40, 0.7);
  std::uniform_real_distribution<double> scale(0.5, 20.0), offset(-50.0, 50.0);
  std::array<double, kFeatureCount> a{}, b{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    a[j] = scale(rng);
    b[j] = offset(rng);
  }
  auto mapped = [&](std::vector<FeatureVector> v) {
    for (auto &fv : v)
      for (std::size_t j = 0; j < kFeatureCount; ++j) fv.values[j] = a[j] * fv.values[j] + b[j];
    return v;
  };
  auto m1 = train(ModelKind::KNN, FeatureView::Combined88, train_set, 1);
  auto m2 = train(ModelKind::KNN, FeatureView::Combined88, mapped(train_set), 1);
  auto test_mapped = mapped(test_set);
  for (std::size_t i = 0; i < test_set.size(); ++i)
    EXPECT_EQ(predict(m1, test_set[i]).label, predict(m2, test_mapped[i]).label);
}

TEST(Model, ViewIsolation) {
  std::mt19937_64 rng(47);
  auto f = toy_features(rng, 60);
  std::normal_distribution<double> g(0.0, 10.0);
  for (auto kind : {ModelKind::KNN, ModelKind::RandomForest, ModelKind::LinearSVM}) {
    Hyperparameters h;
    h.forest.n_trees = 15;
    auto acc = train(kind, FeatureView::AccOnly44, f, 3, h);
    auto gyr = train(kind, FeatureView::GyrOnly44, f, 3, h);
    for (auto probe : f) {
      auto p_acc = predict(acc, probe), p_gyr = predict(gyr, probe);
      auto other = probe;
      for (std::size_t j = kFeaturesPerSensor; j < kFeatureCount; ++j) other.values[j] = g(rng);
      EXPECT_EQ(predict(acc, other).score, p_acc.score);
      other = probe;
      for (std::size_t j = 0; j < kFeaturesPerSensor; ++j) other.values[j] = g(rng);
      EXPECT_EQ(predict(gyr, other).score, p_gyr.score);
    }
  }
}

TEST(Model, SerialisationRoundTripIsBitExact) {
  std::mt19937_64 rng(48);
  auto f = toy_features(rng, 50, 0.6);
  auto probes = toy_features(rng, 30, 0.6);
  for (auto kind : {ModelKind::KNN, ModelKind::RandomForest, ModelKind::LinearSVM}) {
    Hyperparameters h;
    h.forest.n_trees = 10;
    auto m = train(kind, FeatureView::Combined88, f, 5, h);
    std::ostringstream os;
    write_model(os, m);
    std::istringstream is(os.str());
    auto back = read_model(is);
    EXPECT_EQ(back.kind, m.kind);
    EXPECT_EQ(back.view, m.view);
    EXPECT_EQ(back.describe(), m.describe());
    for (const auto &p : probes) {
      auto a = predict(m, p), b = predict(back, p);
      EXPECT_EQ(a.label, b.label);
      EXPECT_EQ(a.score, b.score);
    }
    std::ostringstream again;
    write_model(again, back);
    EXPECT_EQ(os.str(), again.str());
  }
}

TEST(Model, Errors) {
  std::mt19937_64 rng(49);
  auto f = toy_features(rng, 20);
  auto expect_code = [](auto fn, ErrorCode code) {
    try {
      fn();
      ADD_FAILURE() << "no throw";
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code([&] { predict(ClassifierModel{}, f[0]); }, ErrorCode::ModelNotFitted);

  auto one_class = f;
  for (auto &x : one_class) x.label = Label::ADL;
  expect_code([&] { train(ModelKind::KNN, FeatureView::Combined88, one_class, 1); },
              ErrorCode::SingleClassTrainingSet);

  auto broken = f;
  broken[3].values[17] = std::nan("");
  expect_code([&] { train(ModelKind::LinearSVM, FeatureView::Combined88, broken, 1); },
              ErrorCode::IncompleteFeatureVector);

  std::istringstream garbage("not a model");
  EXPECT_THROW(read_model(garbage), Error);
}

TEST(Model, DescribeAndParse) {
  EXPECT_EQ(parse_model_kind("rf"), ModelKind::RandomForest);
  EXPECT_EQ(parse_model_kind("svm"), ModelKind::LinearSVM);
  EXPECT_EQ(parse_model_kind("knn"), ModelKind::KNN);
  EXPECT_FALSE(parse_model_kind("tree").has_value());
  EXPECT_EQ(parse_feature_view("gyr"), FeatureView::GyrOnly44);
  EXPECT_EQ(parse_feature_view("combined"), FeatureView::Combined88);
  ClassifierModel m;
  m.kind = ModelKind::LinearSVM;
  m.view = FeatureView::AccOnly44;
  EXPECT_EQ(m.describe(), "SVM(AccOnly44)");
}
