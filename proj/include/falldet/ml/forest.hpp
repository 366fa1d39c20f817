#pragma once

// CART trees with Gini impurity, bagged into a random forest.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "falldet/ml/knn.hpp"
#include "falldet/ml/standardizer.hpp"
#include "falldet/random.hpp"

namespace falldet::ml {

struct ForestParams {
  std::size_t n_trees = 100;
  /// 0 means unlimited.
  std::size_t max_depth = 16;
  /// Features tried per split; 0 means floor(sqrt(dim)).
  std::size_t max_features = 0;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  /// Worker threads for tree growth; 0 means hardware concurrency.
  std::size_t threads = 0;
};

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Label label = Label::ADL;
  double fall_fraction = 0.0;

  friend bool operator==(const TreeNode &, const TreeNode &) = default;
};

class DecisionTree {
public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode> &nodes() const { return nodes_; }

  const TreeNode &leaf_for(std::span<const double> x) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const auto &n = nodes_[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)];
  }

  Label predict(std::span<const double> x) const { return leaf_for(x).label; }

  static DecisionTree grow(std::span<const Row> rows, std::span<const Label> labels,
                           std::vector<std::size_t> sample, const ForestParams &params,
                           std::size_t max_features, std::mt19937_64 &rng) {
    DecisionTree tree;
    Builder b{rows, labels, params, max_features, rng, tree.nodes_};
    b.build(sample, 0);
    return tree;
  }

private:
  struct Builder {
    std::span<const Row> rows;
    std::span<const Label> labels;
    const ForestParams &params;
    std::size_t max_features;
    std::mt19937_64 &rng;
    std::vector<TreeNode> &nodes;

    static double gini(double falls, double total) {
      if (total <= 0.0) return 0.0;
      double p = falls / total;
      return 2.0 * p * (1.0 - p);
    }

    int make_leaf(std::size_t falls, std::size_t total) {
      TreeNode leaf;
      leaf.fall_fraction = total ? static_cast<double>(falls) / static_cast<double>(total) : 0.0;
      leaf.label = 2 * falls >= total ? Label::Fall : Label::ADL;
      nodes.push_back(leaf);
      return static_cast<int>(nodes.size() - 1);
    }

    int build(std::vector<std::size_t> &idx, std::size_t depth) {
      std::size_t falls = 0;
      for (auto i : idx) falls += labels[i] == Label::Fall ? 1 : 0;
      const std::size_t n = idx.size();
      const bool pure = falls == 0 || falls == n;
      const bool depth_capped = params.max_depth != 0 && depth >= params.max_depth;
      if (pure || depth_capped || n < 2 * params.min_leaf) return make_leaf(falls, n);

      const std::size_t dim = rows[idx.front()].size();
      std::vector<std::size_t> features(dim);
      for (std::size_t j = 0; j < dim; ++j) features[j] = j;
      const std::size_t tries = std::min(max_features, dim);
      for (std::size_t j = 0; j < tries; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, dim - 1);
        std::swap(features[j], features[pick(rng)]);
      }

      const double parent = gini(static_cast<double>(falls), static_cast<double>(n));
      // zero-gain splits allowed
      double best_gain = -std::numeric_limits<double>::infinity();
      int best_feature = -1;
      double best_threshold = 0.0;
      std::vector<std::pair<double, Label>> column(n);
      for (std::size_t f = 0; f < tries; ++f) {
        const std::size_t j = features[f];
        for (std::size_t k = 0; k < n; ++k) column[k] = {rows[idx[k]][j], labels[idx[k]]};
        std::sort(column.begin(), column.end(),
                  [](const auto &a, const auto &b) { return a.first < b.first; });
        std::size_t left_falls = 0;
        for (std::size_t k = 1; k < n; ++k) {
          left_falls += column[k - 1].second == Label::Fall ? 1 : 0;
          if (column[k].first == column[k - 1].first) continue;
          if (k < params.min_leaf || n - k < params.min_leaf) continue;
          const double nl = static_cast<double>(k), nr = static_cast<double>(n - k);
          const double child = (nl * gini(static_cast<double>(left_falls), nl) +
                                nr * gini(static_cast<double>(falls - left_falls), nr)) /
                               static_cast<double>(n);
          const double gain = parent - child;
          if (gain > best_gain + 1e-15) {
            best_gain = gain;
            best_feature = static_cast<int>(j);
            best_threshold = 0.5 * (column[k - 1].first + column[k].first);
            if (best_threshold == column[k].first) best_threshold = column[k - 1].first;
          }
        }
      }
      if (best_feature < 0) return make_leaf(falls, n);

      std::vector<std::size_t> left, right;
      for (auto i : idx)
        (rows[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right)
            .push_back(i);
      idx.clear();
      idx.shrink_to_fit();

      const int self = static_cast<int>(nodes.size());
      TreeNode node;
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.fall_fraction = static_cast<double>(falls) / static_cast<double>(n);
      node.label = 2 * falls >= n ? Label::Fall : Label::ADL;
      nodes.push_back(node);
      const int l = build(left, depth + 1);
      const int r = build(right, depth + 1);
      nodes[static_cast<std::size_t>(self)].left = l;
      nodes[static_cast<std::size_t>(self)].right = r;
      return self;
    }
  };

  std::vector<TreeNode> nodes_;
};

class RandomForest {
public:
  explicit RandomForest(ForestParams params = {}) : params_(params) {}

  const ForestParams &params() const { return params_; }
  const std::vector<DecisionTree> &trees() const { return trees_; }
  bool fitted() const { return !trees_.empty(); }

  void set_trees(std::vector<DecisionTree> trees) { trees_ = std::move(trees); }

  void fit(std::span<const Row> rows, std::span<const Label> labels, std::uint64_t seed) {
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    const std::size_t mtry =
        params_.max_features ? params_.max_features
                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                                            std::sqrt(static_cast<double>(dim)))));
    trees_.assign(params_.n_trees, DecisionTree{});

    // Each tree owns a seed derived from (seed, tree index), so the result
    // does not depend on the thread count.
    auto grow_one = [&](std::size_t t) {
      std::mt19937_64 rng(derive_seed(seed, t));
      std::vector<std::size_t> sample(rows.size());
      if (params_.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
        for (auto &s : sample) s = pick(rng);
      } else {
        for (std::size_t i = 0; i < rows.size(); ++i) sample[i] = i;
      }
      trees_[t] = DecisionTree::grow(rows, labels, std::move(sample), params_, mtry, rng);
    };

    std::size_t workers = params_.threads ? params_.threads : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, params_.n_trees));
    if (workers == 1) {
      for (std::size_t t = 0; t < params_.n_trees; ++t) grow_one(t);
      return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < params_.n_trees; t += workers) grow_one(t);
      });
    for (auto &th : pool) th.join();
  }

  /// Majority of tree votes; ties go to Fall. Score is the Fall vote share.
  Prediction predict(std::span<const double> x) const {
    std::size_t falls = 0;
    for (const auto &tree : trees_) falls += tree.predict(x) == Label::Fall ? 1 : 0;
    Prediction p;
    p.score = trees_.empty() ? 0.0 : static_cast<double>(falls) / static_cast<double>(trees_.size());
    p.label = 2 * falls >= trees_.size() ? Label::Fall : Label::ADL;
    return p;
  }

private:
  ForestParams params_;
  std::vector<DecisionTree> trees_;
};

} // namespace falldet::ml
